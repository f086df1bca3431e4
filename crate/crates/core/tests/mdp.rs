mod common;

use common::{iterate_value, linf, random_mdp, random_policy, random_reward, two_cycle};
use mrpe_core::mdp::{
    action_value, policy_iteration, policy_matrices, policy_value, stationary_distribution, validate_mdp, ActionReward,
    DeterministicPolicy, EmpiricalModel, Mdp, MdpError,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fundamental_matrix_of_two_cycle_by_hand() {
    let g = policy_matrices(&two_cycle(0.5), &DeterministicPolicy::constant(2, 0))
        .unwrap()
        .fundamental;
    let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]) / 0.75;
    assert!((g - expected).amax() < 1e-12);
}

#[test]
fn value_of_two_cycle_by_hand() {
    let v = policy_value(&two_cycle(0.5), &DeterministicPolicy::constant(2, 0), &[1.0, 0.0]).unwrap();
    assert!(linf(&v, &[4.0 / 3.0, 2.0 / 3.0]) < 1e-12);
}

#[test]
fn rewards_outside_the_box_are_rejected() {
    let err = policy_value(&two_cycle(0.5), &DeterministicPolicy::constant(2, 0), &[1.5, 0.0]).unwrap_err();
    assert!(matches!(err, MdpError::RewardOutOfBox { index: 0, .. }));
}

#[test]
fn invalid_models_are_rejected() {
    assert!(matches!(
        Mdp::new(1, 1, vec![0.5], 0.9),
        Err(MdpError::RowNotStochastic { .. })
    ));
    assert!(matches!(
        Mdp::new(1, 1, vec![1.0], 1.0),
        Err(MdpError::DiscountOutOfRange(_))
    ));
    assert!(matches!(Mdp::new(0, 1, vec![], 0.5), Err(MdpError::EmptySpace)));
}

#[test]
fn fundamental_matrix_fixed_point_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let m = random_mdp(&mut rng, 4, 2, 0.9, false);
        let pi = random_policy(&mut rng, 4, 2);
        let pm = policy_matrices(&m, &pi).unwrap();
        let identity = DMatrix::<f64>::identity(4, 4);
        let rhs = &identity + &pm.transition * &pm.fundamental * 0.9;
        assert!((&pm.fundamental - rhs).amax() < 1e-9);
    }
}

#[test]
fn action_values_agree_with_policy_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..30 {
        let m = random_mdp(&mut rng, 4, 3, 0.8, true);
        let pi = random_policy(&mut rng, 4, 3);
        let r = ActionReward::new(4, 3, (0..12).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap();
        let q = action_value(&m, &pi, &r).unwrap();
        let v = policy_value(&m, &pi, &r.restrict(&pi)).unwrap();
        for s in 0..4 {
            assert!((q[(s, pi.action(s))] - v[s]).abs() < 1e-10);
        }
    }
}

/// Value of every deterministic policy, by enumeration.
fn all_policies(n_states: usize, n_actions: usize) -> Vec<DeterministicPolicy> {
    let total = n_actions.pow(n_states as u32);
    (0..total)
        .map(|mut code| {
            let actions = (0..n_states)
                .map(|_| {
                    let a = code % n_actions;
                    code /= n_actions;
                    a
                })
                .collect();
            DeterministicPolicy::new(actions, n_actions).unwrap()
        })
        .collect()
}

fn value_of(m: &Mdp, pi: &DeterministicPolicy, r: &ActionReward) -> Vec<f64> {
    let q = action_value(m, pi, r).unwrap();
    (0..m.n_states()).map(|s| q[(s, pi.action(s))]).collect()
}

#[test]
fn policy_iteration_dominates_every_deterministic_policy() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let m = random_mdp(&mut rng, 4, 3, 0.85, false);
        let r = ActionReward::new(4, 3, (0..12).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap();
        let best = value_of(&m, &policy_iteration(&m, &r).unwrap(), &r);
        for pi in all_policies(4, 3) {
            let v = value_of(&m, &pi, &r);
            assert!(v.iter().zip(&best).all(|(a, b)| *a <= b + 1e-9));
        }
    }
}

#[test]
fn value_and_policy_iteration_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..30 {
        let m = random_mdp(&mut rng, 4, 3, 0.9, true);
        let r = ActionReward::new(4, 3, (0..12).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap();
        let (v_star, greedy) = mrpe_core::mdp::value_iteration(&m, &r, 1e-10).unwrap();
        let pi = policy_iteration(&m, &r).unwrap();
        assert!(linf(&value_of(&m, &pi, &r), &v_star) < 1e-6);
        assert!(linf(&value_of(&m, &greedy, &r), &v_star) < 1e-6);
        let q = action_value(&m, &pi, &r).unwrap();
        for s in 0..4 {
            let max_q = (0..3).map(|a| q[(s, a)]).fold(f64::NEG_INFINITY, f64::max);
            assert!((max_q - v_star[s]).abs() < 1e-6);
        }
    }
}

#[test]
fn one_hot_reward_on_riverswim_end_selects_right_everywhere() {
    let m = mrpe_core::envs::make_riverswim(5, 0.7, mrpe_core::envs::default_p_prime(0.7), 0.9).unwrap();
    let pi = policy_iteration(&m, &ActionReward::one_hot(5, 2, 4, 1)).unwrap();
    assert_eq!(pi.actions(), &[1, 1, 1, 1, 1]);
}

#[test]
fn stationary_distribution_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..20 {
        let m = random_mdp(&mut rng, 5, 1, 0.9, true);
        let chain = policy_matrices(&m, &DeterministicPolicy::constant(5, 0))
            .unwrap()
            .transition;
        let stationary = stationary_distribution(&chain).unwrap();
        assert!(stationary.unique);
        let mut power = chain.clone();
        for _ in 0..10 {
            power = &power * &power;
        }
        for s in 0..5 {
            assert!((power[(0, s)] - stationary.distribution[s]).abs() < 1e-8);
        }
    }
}

#[test]
fn empirical_row_concentrates() {
    let mut model = EmpiricalModel::new(2, 1, 0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..10_000 {
        let next = usize::from(rng.random_bool(0.7));
        model.update(0, 0, next).unwrap();
    }
    let row = model.estimate_row(0, 0);
    assert!((row[1] - 0.7).abs() < 0.02);
    assert_eq!(model.estimate_row(1, 0), vec![0.5, 0.5]);
    assert_eq!(model.state_visits(0), 10_000);
}

#[test]
fn random_instances_validate() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let m = random_mdp(&mut rng, 5, 2, 0.9, true);
    let report = validate_mdp(&m).unwrap();
    assert!(report.communicating && report.aperiodic);
    let cycle = validate_mdp(&two_cycle(0.5)).unwrap();
    assert!(cycle.communicating && !cycle.aperiodic);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_equation_holds(seed in any::<u64>(), n in 2usize..7, na in 1usize..4, gamma in 0.1f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mdp(&mut rng, n, na, gamma, false);
        let pi = random_policy(&mut rng, n, na);
        let r = random_reward(&mut rng, n);
        let v = policy_value(&m, &pi, &r).unwrap();
        prop_assert!(linf(&v, &iterate_value(&m, &pi, &r)) < 1e-9);
        prop_assert!(v.iter().all(|&x| (-1e-12..=1.0 / (1.0 - gamma) + 1e-9).contains(&x)));
    }

    #[test]
    fn text_round_trip(seed in any::<u64>(), n in 1usize..6, na in 1usize..4, gamma in 0.05f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mdp(&mut rng, n, na, gamma, false);
        let back = Mdp::from_text(&m.to_text()).unwrap();
        prop_assert_eq!(back.n_states(), n);
        prop_assert!(linf(back.transitions(), m.transitions()) < 1e-15);
        prop_assert!((back.discount() - gamma).abs() < 1e-15);
    }

    #[test]
    fn empirical_counts_are_consistent(transitions in proptest::collection::vec((0usize..3, 0usize..2, 0usize..3), 0..200)) {
        let mut model = EmpiricalModel::new(3, 2, 0.9);
        for &(s, a, next) in &transitions {
            model.update(s, a, next).unwrap();
        }
        prop_assert_eq!(model.total(), transitions.len() as u64);
        for s in 0..3 {
            prop_assert_eq!(model.state_visits(s), model.visits(s, 0) + model.visits(s, 1));
            for a in 0..2 {
                let row = model.estimate_row(s, a);
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
