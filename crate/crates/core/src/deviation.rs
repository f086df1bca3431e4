//! One-step value deviations and confusing models.
//!
//! For a policy `π`, reward vector `r` and anchor state `s`, the deviation
//! `ρ(s, s') = V(s') − Σ_x P(x|s,π(s)) V(x)` measures how much the value moves
//! when the transition out of `s` is redirected towards `s'`. It is linear in
//! `r` through `Γ(s) = (I − 1·P(s,π(s))ᵀ) G^π`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::mdp::{check_unit_box, evaluate_vector, policy_matrices, policy_value, DeterministicPolicy, Mdp, MdpError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviationError {
    #[error("delta {0} outside (0, 1)")]
    InvalidDelta(f64),
    #[error("accuracy must be positive, got {0}")]
    InvalidEps(f64),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// `ρ` for one `(M, π, r)` triple, with row norms cached.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationMatrix {
    /// Row `s` is the anchor state, column `s'` the probe state.
    pub rho: DMatrix<f64>,
    /// `‖ρ(s)‖∞` for each anchor.
    pub row_norms: Vec<f64>,
    /// `max_s ‖ρ(s)‖∞`.
    pub max_norm: f64,
    /// The value vector `V^π` the deviations were computed from.
    pub values: Vec<f64>,
}

impl DeviationMatrix {
    pub fn get(&self, s: usize, s_prime: usize) -> f64 {
        self.rho[(s, s_prime)]
    }

    /// `sp(V) = max V − min V`.
    pub fn span(&self) -> f64 {
        span(&self.values)
    }
}

pub fn span(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// `r − r(0)·1`. `ρ` ignores constant shifts of the reward, and working with
/// the shifted reward makes `ρ` exactly zero for constant rewards.
fn centered(r: &[f64]) -> Vec<f64> {
    r.iter().map(|x| x - r[0]).collect()
}

pub fn rho_matrix(m: &Mdp, pi: &DeterministicPolicy, r: &[f64]) -> Result<DeviationMatrix, MdpError> {
    let values = policy_value(m, pi, r)?;
    let shifted = evaluate_vector(m, pi, &centered(r))?;
    let n = m.n_states();
    let expected: Vec<f64> = (0..n)
        .map(|s| m.row(s, pi.action(s)).iter().zip(&shifted).map(|(p, v)| p * v).sum())
        .collect();
    let rho = DMatrix::from_fn(n, n, |s, sp| shifted[sp] - expected[s]);
    let row_norms: Vec<f64> = (0..n).map(|s| rho.row(s).amax()).collect();
    let max_norm = row_norms.iter().copied().fold(0.0, f64::max);
    Ok(DeviationMatrix {
        rho,
        row_norms,
        max_norm,
        values,
    })
}

/// The matrices `Γ(s)` for every anchor state of a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaOperator {
    matrices: Vec<DMatrix<f64>>,
}

impl GammaOperator {
    pub fn anchor(&self, s: usize) -> &DMatrix<f64> {
        &self.matrices[s]
    }

    pub fn n_states(&self) -> usize {
        self.matrices.len()
    }

    /// `e_{s'}ᵀ Γ(s) r`, evaluated on the centered reward since `Γ(s)·1 = 0`.
    pub fn rho(&self, s: usize, s_prime: usize, r: &[f64]) -> f64 {
        let base = r.first().copied().unwrap_or(0.0);
        self.matrices[s]
            .row(s_prime)
            .iter()
            .zip(r)
            .map(|(g, x)| g * (x - base))
            .sum()
    }

    /// Positive and negative parts of row `s'` of `Γ(s)`: `(Σ max(x,0), Σ max(−x,0))`.
    ///
    /// Entries below `1e-12` in magnitude are dropped to avoid sign noise.
    pub fn signed_sums(&self, s: usize, s_prime: usize) -> (f64, f64) {
        let mut plus = 0.0;
        let mut minus = 0.0;
        for &x in self.matrices[s].row(s_prime).iter() {
            if x.abs() < 1e-12 {
                continue;
            }
            if x > 0.0 {
                plus += x;
            } else {
                minus -= x;
            }
        }
        (plus, minus)
    }
}

pub fn gamma_operator(m: &Mdp, pi: &DeterministicPolicy) -> Result<GammaOperator, MdpError> {
    let g = policy_matrices(m, pi)?.fundamental;
    let n = m.n_states();
    let matrices = (0..n)
        .map(|s| {
            let next = DVector::from_column_slice(m.row(s, pi.action(s)));
            // Pᵀ_s G is the row vector of expected next-state visitation.
            let expected = next.transpose() * &g;
            DMatrix::from_fn(n, n, |sp, x| g[(sp, x)] - expected[x])
        })
        .collect();
    Ok(GammaOperator { matrices })
}

/// `diag(ρ) = (I − P^π)(I − γP^π)^{-1} r`.
pub fn diag_rho(m: &Mdp, pi: &DeterministicPolicy, r: &[f64]) -> Result<Vec<f64>, MdpError> {
    check_unit_box(r)?;
    let pm = policy_matrices(m, pi)?;
    let n = m.n_states();
    let gr = &pm.fundamental * DVector::from_column_slice(&centered(r));
    let d = (DMatrix::identity(n, n) - &pm.transition) * gr;
    Ok(d.iter().copied().collect())
}

/// Outcome of the existence tests for a model whose value for `(π, r)` differs by more than `2ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltConditions {
    /// Some anchor has `‖ρ(s)‖∞ > 2ε/γ`, which guarantees a confusing model.
    pub sufficient_holds: bool,
    /// Some anchor has `‖ρ(s)‖∞ > ε(1−γ)/γ`, without which none exists.
    pub necessary_holds: bool,
    /// The anchor with the largest row norm, when the necessary condition holds.
    pub witness_state: Option<usize>,
}

pub fn alt_model_conditions(
    m: &Mdp,
    pi: &DeterministicPolicy,
    r: &[f64],
    eps: f64,
) -> Result<AltConditions, DeviationError> {
    if !(eps > 0.0) {
        return Err(DeviationError::InvalidEps(eps));
    }
    let dev = rho_matrix(m, pi, r)?;
    let gamma = m.discount();
    let sufficient_holds = dev.max_norm > 2.0 * eps / gamma;
    let necessary_holds = dev.max_norm > eps * (1.0 - gamma) / gamma;
    let witness_state = necessary_holds.then(|| argmax(&dev.row_norms));
    Ok(AltConditions {
        sufficient_holds,
        necessary_holds,
        witness_state,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Redirects a fraction `delta` of the transition out of `(s0, π(s0))` to `s1`.
///
/// The new row is `delta·e_{s1} + (1 − delta)·P(·|s0, π(s0))`; every other row
/// is unchanged, so the result is absolutely continuous with respect to `m`
/// wherever `m` has support.
pub fn construct_confusing_model(
    m: &Mdp,
    pi: &DeterministicPolicy,
    s0: usize,
    s1: usize,
    delta: f64,
) -> Result<Mdp, DeviationError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(DeviationError::InvalidDelta(delta));
    }
    let n = m.n_states();
    if s0 >= n || s1 >= n || pi.n_states() != n {
        return Err(MdpError::IndexOutOfRange(format!("anchor ({s0}, {s1})")).into());
    }
    let a = pi.action(s0);
    let mut row: Vec<f64> = m.row(s0, a).iter().map(|p| (1.0 - delta) * p).collect();
    row[s1] += delta;
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    Ok(m.with_row(s0, a, &row)?)
}

/// Open interval of `delta` for which redirecting `(s0, π(s0))` towards `s1`
/// provably moves the value by more than `2ε`.
///
/// The lower end is `2ε(1−γp) / (γ(|ρ(s0,s1)| − 2εp))` with
/// `p = P(s0|s0,π(s0))`; `None` when the interval is empty.
pub fn confusing_delta_range(
    m: &Mdp,
    pi: &DeterministicPolicy,
    dev: &DeviationMatrix,
    eps: f64,
    s0: usize,
    s1: usize,
) -> Option<(f64, f64)> {
    let gamma = m.discount();
    let p = m.prob(s0, pi.action(s0), s0);
    let rho = dev.get(s0, s1).abs();
    let denom = gamma * (rho - 2.0 * eps * p);
    if denom <= 0.0 {
        return None;
    }
    let low = 2.0 * eps * (1.0 - gamma * p) / denom;
    (low < 1.0).then_some((low.max(0.0), 1.0))
}

/// A confusing model built at the pair with the largest `|ρ|`, using the
/// midpoint of the valid `delta` interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusingModel {
    pub model: Mdp,
    pub s0: usize,
    pub s1: usize,
    pub delta: f64,
}

pub fn auto_confusing_model(
    m: &Mdp,
    pi: &DeterministicPolicy,
    r: &[f64],
    eps: f64,
) -> Result<Option<ConfusingModel>, DeviationError> {
    if !(eps > 0.0) {
        return Err(DeviationError::InvalidEps(eps));
    }
    let dev = rho_matrix(m, pi, r)?;
    let n = m.n_states();
    let mut best: Option<(usize, usize, f64)> = None;
    for s0 in 0..n {
        for s1 in 0..n {
            let x = dev.get(s0, s1).abs();
            if best.is_none_or(|(_, _, b)| x > b) {
                best = Some((s0, s1, x));
            }
        }
    }
    let Some((s0, s1, _)) = best else { return Ok(None) };
    let Some((low, high)) = confusing_delta_range(m, pi, &dev, eps, s0, s1) else {
        return Ok(None);
    };
    let delta = 0.5 * (low + high);
    let model = construct_confusing_model(m, pi, s0, s1, delta)?;
    Ok(Some(ConfusingModel { model, s0, s1, delta }))
}

/// `‖V_m − V_{m_alt}‖∞` for policy `π` and a shared reward vector.
pub fn value_gap(m: &Mdp, m_alt: &Mdp, pi: &DeterministicPolicy, r: &[f64]) -> Result<f64, MdpError> {
    value_gap_between(m, r, m_alt, r, pi)
}

/// As [`value_gap`], with each model carrying its own expected reward vector.
pub fn value_gap_between(
    m: &Mdp,
    r: &[f64],
    m_alt: &Mdp,
    r_alt: &[f64],
    pi: &DeterministicPolicy,
) -> Result<f64, MdpError> {
    if m.n_states() != m_alt.n_states() || m.n_actions() != m_alt.n_actions() {
        return Err(MdpError::ShapeMismatch {
            expected: m.transitions().len(),
            got: m_alt.transitions().len(),
        });
    }
    let v = policy_value(m, pi, r)?;
    let w = policy_value(m_alt, pi, r_alt)?;
    Ok(v.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// `KL(p ‖ q)` with `0·log(0/q) = 0`; infinite when `p > 0 = q`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a <= 0.0 {
                0.0
            } else if b <= 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).ln()
            }
        })
        .sum()
}

/// `Σ_{s,a} ω(s,a) KL(P(s,a), P'(s,a))` for a state-major occupancy `ω`.
pub fn weighted_kl(m: &Mdp, m_alt: &Mdp, omega: &[f64]) -> f64 {
    let na = m.n_actions();
    let mut total = 0.0;
    for s in 0..m.n_states() {
        for a in 0..na {
            let w = omega[s * na + a];
            if w > 0.0 {
                total += w * kl_divergence(m.row(s, a), m_alt.row(s, a));
            }
        }
    }
    total
}
