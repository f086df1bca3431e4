mod common;

use common::{random_mdp, random_policy, random_reward, self_loops};
use mrpe_core::deviation::{gamma_operator, rho_matrix};
use mrpe_core::mdp::DeterministicPolicy;
use mrpe_core::rewards::{
    canonical_basis, complexity_matrix, sample_finite_rewards, sup_abs_rho, sup_abs_rho_with, Polytope, RewardError,
    RewardSet,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `max_{r ∈ {0,1}^S} |ρ_r(s, s')|` by enumerating the cube's vertices.
fn vertex_sup(m: &mrpe_core::mdp::Mdp, pi: &DeterministicPolicy, s: usize, s_prime: usize) -> f64 {
    let n = m.n_states();
    (0..1u32 << n)
        .map(|bits| {
            let r: Vec<f64> = (0..n).map(|i| f64::from((bits >> i) & 1)).collect();
            rho_matrix(m, pi, &r).unwrap().get(s, s_prime).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn identity_chain_box_supremum() {
    let m = self_loops(2, 1, 0.5);
    let pi = DeterministicPolicy::constant(2, 0);
    assert!((sup_abs_rho(&m, &pi, 0, 1, &RewardSet::Box01).unwrap() - 2.0).abs() < 1e-12);
    let hot = RewardSet::finite(vec![vec![0.0, 1.0]]).unwrap();
    assert!((sup_abs_rho(&m, &pi, 0, 1, &hot).unwrap() - 2.0).abs() < 1e-12);
    let cm = complexity_matrix(&m, &[pi], &[RewardSet::Box01], true).unwrap();
    assert!(cm.row(0).iter().all(|&a| (a - 4.0).abs() < 1e-12));
}

#[test]
fn constant_finite_sets_have_zero_complexity() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let m = random_mdp(&mut rng, 4, 2, 0.9, false);
    let pis = vec![random_policy(&mut rng, 4, 2), random_policy(&mut rng, 4, 2)];
    let sets = vec![
        RewardSet::finite(vec![vec![0.4; 4]]).unwrap(),
        RewardSet::finite(vec![vec![1.0; 4], vec![0.0; 4]]).unwrap(),
    ];
    assert!(complexity_matrix(&m, &pis, &sets, true).unwrap().is_zero());
}

#[test]
fn box_polytope_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..50 {
        let n = rng.random_range(2..=5);
        let gamma = rng.random_range(0.5..0.95);
        let m = random_mdp(&mut rng, n, 2, gamma, false);
        let pi = random_policy(&mut rng, n, 2);
        let op = gamma_operator(&m, &pi).unwrap();
        let poly = RewardSet::Polytope(Polytope::unit_box(n));
        for s in 0..n {
            for sp in 0..n {
                let closed = sup_abs_rho_with(&op, s, sp, &RewardSet::Box01).unwrap();
                let lp = sup_abs_rho_with(&op, s, sp, &poly).unwrap();
                assert!((closed - lp).abs() < 1e-8, "{closed} vs {lp}");
            }
        }
    }
}

#[test]
fn polytope_optimum_dominates_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    // {r ∈ [0,1]^4 : r0 + r1 ≤ 1, r2 − r3 ≤ 0.2}
    let poly = Polytope::new(
        vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, -1.0]],
        vec![1.0, 0.2],
    )
    .unwrap();
    let m = random_mdp(&mut rng, 4, 2, 0.9, false);
    let pi = random_policy(&mut rng, 4, 2);
    let op = gamma_operator(&m, &pi).unwrap();
    let set = RewardSet::Polytope(poly.clone());
    let mut feasible = 0;
    while feasible < 100 {
        let r = random_reward(&mut rng, 4);
        if !poly.contains(&r, 0.0) {
            continue;
        }
        feasible += 1;
        for s in 0..4 {
            for sp in 0..4 {
                assert!(sup_abs_rho_with(&op, s, sp, &set).unwrap() >= op.rho(s, sp, &r).abs() - 1e-9);
            }
        }
    }
}

#[test]
fn infeasible_polytope_is_rejected() {
    let err = Polytope::new(vec![vec![-1.0, 0.0]], vec![-2.0]).unwrap_err();
    assert!(matches!(err, RewardError::InfeasiblePolytope));
}

#[test]
fn sampled_sets_are_canonical_and_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let mut hits = [0usize; 5];
    for _ in 0..10_000 {
        let RewardSet::Finite(rs) = sample_finite_rewards(&mut rng, 5, 3).unwrap() else {
            panic!("finite set expected");
        };
        assert_eq!(rs.len(), 3);
        for r in &rs {
            assert_eq!(r.iter().sum::<f64>(), 1.0);
            hits[r.iter().position(|&x| x == 1.0).unwrap()] += 1;
        }
        let mut ids: Vec<usize> = rs.iter().map(|r| r.iter().position(|&x| x == 1.0).unwrap()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 3);
    }
    for h in hits {
        assert!((h as f64 / 10_000.0 - 0.6).abs() < 0.02);
    }
    let RewardSet::Finite(mut full) = sample_finite_rewards(&mut rng, 4, 4).unwrap() else {
        panic!("finite set expected");
    };
    full.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert_eq!(RewardSet::Finite(full), canonical_basis(4));
    assert!(matches!(
        sample_finite_rewards(&mut rng, 3, 4),
        Err(RewardError::KTooLarge { k: 4, n: 3 })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn box_closed_form_matches_vertex_enumeration(seed in any::<u64>(), n in 2usize..7, gamma in 0.2f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mdp(&mut rng, n, 2, gamma, false);
        let pi = random_policy(&mut rng, n, 2);
        let op = gamma_operator(&m, &pi).unwrap();
        let s = rng.random_range(0..n);
        for sp in 0..n {
            let closed = sup_abs_rho_with(&op, s, sp, &RewardSet::Box01).unwrap();
            prop_assert!((closed - vertex_sup(&m, &pi, s, sp)).abs() < 1e-9);
        }
    }

    #[test]
    fn larger_sets_have_larger_complexity(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mdp(&mut rng, n, 2, 0.9, false);
        let pi = random_policy(&mut rng, n, 2);
        let canonical = complexity_matrix(&m, std::slice::from_ref(&pi), &[canonical_basis(n)], true).unwrap();
        let full = complexity_matrix(&m, &[pi], &[RewardSet::Box01], true).unwrap();
        for s in 0..n {
            prop_assert!(canonical.get(0, s) <= full.get(0, s) + 1e-12);
        }
    }

    #[test]
    fn complexity_ignores_reward_order(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mdp(&mut rng, n, 2, 0.9, false);
        let pi = random_policy(&mut rng, n, 2);
        let rewards: Vec<Vec<f64>> = (0..3).map(|_| random_reward(&mut rng, n)).collect();
        let mut reversed = rewards.clone();
        reversed.reverse();
        let a = complexity_matrix(&m, std::slice::from_ref(&pi), &[RewardSet::finite(rewards).unwrap()], true).unwrap();
        let b = complexity_matrix(&m, &[pi], &[RewardSet::finite(reversed).unwrap()], true).unwrap();
        prop_assert_eq!(a, b);
    }
}
