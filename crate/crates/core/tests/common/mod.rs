#![allow(dead_code)]

use mrpe_core::mdp::{DeterministicPolicy, Mdp};
use rand::Rng;

/// A random MDP whose rows mix a random sparse support with full support
/// when `dense` is set.
pub fn random_mdp<R: Rng>(rng: &mut R, n_states: usize, n_actions: usize, gamma: f64, dense: bool) -> Mdp {
    Mdp::from_fn(n_states, n_actions, gamma, |_, _| {
        let mut row: Vec<f64> = (0..n_states)
            .map(|_| {
                if dense || rng.random_bool(0.6) {
                    rng.random_range(0.05..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        if row.iter().all(|&x| x == 0.0) {
            row[rng.random_range(0..n_states)] = 1.0;
        }
        let total: f64 = row.iter().sum();
        row.iter().map(|x| x / total).collect()
    })
    .expect("rows are normalized")
}

pub fn random_policy<R: Rng>(rng: &mut R, n_states: usize, n_actions: usize) -> DeterministicPolicy {
    DeterministicPolicy::new(
        (0..n_states).map(|_| rng.random_range(0..n_actions)).collect(),
        n_actions,
    )
    .unwrap()
}

pub fn random_reward<R: Rng>(rng: &mut R, n_states: usize) -> Vec<f64> {
    (0..n_states).map(|_| rng.random_range(0.0..=1.0)).collect()
}

/// `V = r + γ P^π V` solved by fixed-point iteration, independent of any
/// matrix inversion.
pub fn iterate_value(m: &Mdp, pi: &DeterministicPolicy, r: &[f64]) -> Vec<f64> {
    let n = m.n_states();
    let mut v = vec![0.0; n];
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| r[s] + m.discount() * m.row(s, pi.action(s)).iter().zip(&v).map(|(p, x)| p * x).sum::<f64>())
            .collect();
        let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if diff < 1e-13 {
            return v;
        }
    }
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// 2-state deterministic cycle with one action.
pub fn two_cycle(gamma: f64) -> Mdp {
    Mdp::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], gamma).unwrap()
}

/// Every state loops on itself under every action.
pub fn self_loops(n_states: usize, n_actions: usize, gamma: f64) -> Mdp {
    Mdp::from_fn(n_states, n_actions, gamma, |s, _| {
        (0..n_states).map(|j| if j == s { 1.0 } else { 0.0 }).collect()
    })
    .unwrap()
}
