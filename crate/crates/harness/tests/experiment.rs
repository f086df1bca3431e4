use std::collections::BTreeSet;

use mrpe_core::envs::EnvSpec;
use mrpe_core::mdp::{policy_iteration, policy_value, ActionReward, DeterministicPolicy, Mdp};
use mrpe_core::rewards::RewardSet;
use mrpe_harness::config::{AgentSpec, ExperimentConfig, RewardMode};
use mrpe_harness::experiment::{
    default_policy, generate_target_policies, linf_distance, make_targets, run_experiment, seed_rng, seed_setup,
    sup_error, RewardId,
};
use mrpe_harness::output::write_records;
use mrpe_harness::stats::median_curves;
use mrpe_harness::sweep::complexity_sweep;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config(reward_mode: RewardMode) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvSpec::riverswim(4),
        reward_mode,
        n_policies: 2,
        agents: vec![
            AgentSpec::mrnas(),
            AgentSpec::NoisyUniform { eps: 0.3 },
            AgentSpec::NoisyVisitation,
        ],
        horizon: 2000,
        eval_period: 500,
        seeds: vec![0, 1, 2],
        ..ExperimentConfig::default()
    }
}

#[test]
fn exhausting_all_pairs_yields_every_one_hot_optimum() {
    let m = EnvSpec::riverswim(3).build(0.9).unwrap();
    let (ns, na) = (m.n_states(), m.n_actions());
    let policies = generate_target_policies(&mut seed_rng(4, 0), &m, ns * na).unwrap();
    let produced: BTreeSet<Vec<usize>> = policies.iter().map(|p| p.actions().to_vec()).collect();
    let expected: BTreeSet<Vec<usize>> = (0..ns)
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .map(|(s, a)| {
            policy_iteration(&m, &ActionReward::one_hot(ns, na, s, a))
                .unwrap()
                .actions()
                .to_vec()
        })
        .collect();
    assert_eq!(policies.len(), ns * na);
    assert_eq!(produced, expected);
    assert!(generate_target_policies(&mut seed_rng(4, 0), &m, ns * na + 1).is_err());
}

#[test]
fn target_generation_is_deterministic() {
    let m = EnvSpec::narms(4).build(0.9).unwrap();
    let a = generate_target_policies(&mut seed_rng(7, 0), &m, 3).unwrap();
    let b = generate_target_policies(&mut seed_rng(7, 0), &m, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn riverswim_default_target_swims_right() {
    let spec = EnvSpec::riverswim(5);
    let pi = default_policy(&spec, &spec.build(0.9).unwrap()).unwrap();
    assert_eq!(pi, DeterministicPolicy::constant(5, 1));
}

#[test]
fn finite_targets_have_k_canonical_rewards() {
    let cfg = small_config(RewardMode::Finite { k: 2 });
    let m = cfg.env.build(cfg.gamma).unwrap();
    let targets = make_targets(&mut seed_rng(0, 0), &m, &cfg).unwrap();
    assert_eq!(targets.len(), 2);
    for set in &targets.sets {
        let RewardSet::Finite(rs) = set else {
            panic!("expected a finite set")
        };
        assert_eq!(rs.len(), 2);
        for r in rs {
            assert_eq!(r.iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(r.iter().filter(|&&x| x == 0.0).count(), r.len() - 1);
        }
    }
}

#[test]
fn ground_truth_matches_recomputation_bit_for_bit() {
    let cfg = small_config(RewardMode::Finite { k: 3 });
    let m = cfg.env.build(cfg.gamma).unwrap();
    let (targets, truth) = seed_setup(&cfg, &m, 5).unwrap();
    for (i, (pi, set)) in targets.policies.iter().zip(&targets.sets).enumerate() {
        let RewardSet::Finite(rs) = set else { unreachable!() };
        for (j, r) in rs.iter().enumerate() {
            assert_eq!(truth.value(i, j), policy_value(&m, pi, r).unwrap().as_slice());
        }
    }
    let errors = truth.errors(&m, &targets.policies).unwrap();
    assert!(errors.iter().all(|&(_, _, e)| e == 0.0));
}

#[test]
fn one_snapshot_when_horizon_equals_period() {
    let cfg = ExperimentConfig {
        horizon: 500,
        ..small_config(RewardMode::RewardFree)
    };
    let records = run_experiment(&cfg).unwrap();
    assert!(records.iter().all(|r| r.step == 500 && r.reward == RewardId::Average));
    assert_eq!(records.len(), cfg.seeds.len() * cfg.agents.len() * cfg.n_policies);
}

#[test]
fn snapshot_steps_align_across_agents() {
    let cfg = small_config(RewardMode::Finite { k: 2 });
    let records = run_experiment(&cfg).unwrap();
    let steps_of =
        |agent: &str| -> BTreeSet<u64> { records.iter().filter(|r| r.agent == agent).map(|r| r.step).collect() };
    let reference = steps_of("mrnas");
    assert_eq!(reference, [500, 1000, 1500, 2000].into_iter().collect());
    for spec in &cfg.agents {
        assert_eq!(steps_of(spec.name()), reference);
    }
    assert_eq!(records.len(), 3 * 3 * 4 * 2 * 2);
    let keys: Vec<_> = records.iter().map(|r| r.sort_key()).collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn reruns_produce_identical_csv_bytes() {
    let cfg = small_config(RewardMode::Finite { k: 2 });
    let render = || {
        let mut buffer = Vec::new();
        write_records(&run_experiment(&cfg).unwrap(), &mut buffer).unwrap();
        buffer
    };
    assert_eq!(render(), render());
}

#[test]
fn box_sup_error_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = EnvSpec::riverswim(4).build(0.9).unwrap();
    for _ in 0..10 {
        let m_hat = Mdp::from_fn(4, 2, 0.9, |s, a| {
            let row: Vec<f64> = m.row(s, a).iter().map(|p| p + rng.random_range(0.0..0.2)).collect();
            let total: f64 = row.iter().sum();
            row.iter().map(|x| x / total).collect()
        })
        .unwrap();
        let pi = DeterministicPolicy::new((0..4).map(|_| rng.random_range(0..2)).collect(), 2).unwrap();
        let mut brute: f64 = 0.0;
        for mask in 0..16u32 {
            let r: Vec<f64> = (0..4).map(|s| ((mask >> s) & 1) as f64).collect();
            let gap = linf_distance(
                &policy_value(&m_hat, &pi, &r).unwrap(),
                &policy_value(&m, &pi, &r).unwrap(),
            );
            brute = brute.max(gap);
        }
        let computed = sup_error(&m_hat, &m, &pi, &RewardSet::Box01).unwrap();
        assert!((computed - brute).abs() < 1e-10, "{computed} vs {brute}");
        let polytope = sup_error(
            &m_hat,
            &m,
            &pi,
            &RewardSet::Polytope(mrpe_core::rewards::Polytope::unit_box(4)),
        )
        .unwrap();
        assert!((polytope - brute).abs() < 1e-8);
    }
}

#[test]
fn characteristic_time_grows_with_riverswim_length() {
    let cfg = ExperimentConfig {
        reward_mode: RewardMode::RewardFree,
        sweep: vec![4, 6, 8],
        ..ExperimentConfig::default()
    };
    let points = complexity_sweep(&cfg).unwrap();
    assert_eq!(points.iter().map(|p| p.param).collect::<Vec<_>>(), [4, 6, 8]);
    assert!(points.windows(2).all(|w| w[1].u_star > w[0].u_star));
}

#[test]
fn mrnas_error_decreases_with_samples() {
    let cfg = ExperimentConfig {
        env: EnvSpec::riverswim(5),
        agents: vec![AgentSpec::mrnas()],
        horizon: 20_000,
        eval_period: 2_000,
        seeds: (0..10).collect(),
        ..ExperimentConfig::default()
    };
    let curve: Vec<f64> = median_curves(&run_experiment(&cfg).unwrap())["mrnas"]
        .iter()
        .map(|p| p.1)
        .collect();
    assert_eq!(curve.len(), 10);
    assert!(curve[9] < curve[0]);
    let early: f64 = curve[..5].iter().sum();
    let late: f64 = curve[5..].iter().sum();
    assert!(late < early, "{curve:?}");
}
