//! Seeded multi-agent runs with periodic evaluation against the true model.
//!
//! Per seed, targets are drawn from stream 0 of a ChaCha8 generator seeded by
//! the seed; agent `k` of the configuration samples actions and transitions
//! from stream `k + 1`. Every `eval_period` steps each target is evaluated
//! exactly on the agent's empirical model and compared with the true value.

use std::fmt;

use mrpe_core::agents::{
    sample_action, Agent, AgentError, GvfExplorer, MrNas, MrNasConfig, NoisyMode, NoisyPolicy, SfNr, Targets,
};
use mrpe_core::allocation::AllocationError;
use mrpe_core::envs::{default_target, EnvError, EnvSpec};
use mrpe_core::mdp::{
    policy_iteration, policy_matrices, policy_value, ActionReward, DeterministicPolicy, EmpiricalModel, Mdp, MdpError,
};
use mrpe_core::rewards::{canonical_basis, sample_finite_rewards, RewardError, RewardSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{AgentSpec, ConfigError, ExperimentConfig, RewardMode};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error("{0}")]
    Invalid(String),
}

/// Which reward of a policy's set a record refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RewardId {
    Index(usize),
    /// Mean over the canonical basis.
    Average,
}

impl fmt::Display for RewardId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardId::Index(i) => write!(f, "{i}"),
            RewardId::Average => write!(f, "avg"),
        }
    }
}

impl std::str::FromStr for RewardId {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        if text == "avg" {
            return Ok(RewardId::Average);
        }
        text.parse()
            .map(RewardId::Index)
            .map_err(|e| format!("reward id `{text}`: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub seed: u64,
    pub agent: String,
    pub step: u64,
    pub policy: usize,
    pub reward: RewardId,
    pub linf_error: f64,
}

impl EvalRecord {
    pub fn sort_key(&self) -> (u64, &str, u64, usize, RewardId) {
        (self.seed, &self.agent, self.step, self.policy, self.reward)
    }
}

/// Rounds to the ten significant digits written to CSV, so that records
/// survive a write/read round trip unchanged.
pub fn round_sig(x: f64) -> f64 {
    format!("{x:.9e}").parse().expect("formatted float parses")
}

/// `k` policies, each optimal for a one-hot reward on a distinct random
/// state-action pair.
pub fn generate_target_policies<R: Rng + ?Sized>(
    rng: &mut R,
    m: &Mdp,
    k: usize,
) -> Result<Vec<DeterministicPolicy>, ExperimentError> {
    let (ns, na) = (m.n_states(), m.n_actions());
    if k > ns * na {
        return Err(ExperimentError::Invalid(format!(
            "{k} target policies but only {} pairs",
            ns * na
        )));
    }
    rand::seq::index::sample(rng, ns * na, k)
        .into_iter()
        .map(|pair| {
            Ok(policy_iteration(
                m,
                &ActionReward::one_hot(ns, na, pair / na, pair % na),
            )?)
        })
        .collect()
}

/// The environment's default target: optimal for the one-hot reward on its designated pair.
pub fn default_policy(spec: &EnvSpec, m: &Mdp) -> Result<DeterministicPolicy, ExperimentError> {
    let (s, a) = default_target(spec);
    Ok(policy_iteration(
        m,
        &ActionReward::one_hot(m.n_states(), m.n_actions(), s, a),
    )?)
}

/// Draws the targets of one seed: policies first, then one reward set per
/// policy. The single-policy mode uses the environment's default target.
pub fn make_targets<R: Rng + ?Sized>(rng: &mut R, m: &Mdp, cfg: &ExperimentConfig) -> Result<Targets, ExperimentError> {
    let policies = match cfg.reward_mode {
        RewardMode::SinglePolicyRewardFree => vec![default_policy(&cfg.env, m)?],
        _ => generate_target_policies(rng, m, cfg.policy_count())?,
    };
    let sets = policies
        .iter()
        .map(|_| match cfg.reward_mode {
            RewardMode::Finite { k } => sample_finite_rewards(rng, m.n_states(), k),
            RewardMode::RewardFree | RewardMode::SinglePolicyRewardFree => Ok(RewardSet::Box01),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Targets::new(policies, sets)?)
}

pub fn seed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The rewards a set is evaluated on, and whether their errors are averaged.
fn evaluation_rewards(set: &RewardSet, n_states: usize) -> (Vec<Vec<f64>>, bool) {
    match set {
        RewardSet::Finite(rs) => (rs.clone(), false),
        RewardSet::Box01 | RewardSet::Polytope(_) => match canonical_basis(n_states) {
            RewardSet::Finite(rs) => (rs, true),
            _ => unreachable!("the canonical basis is finite"),
        },
    }
}

/// True values of every evaluated (policy, reward) pair, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    rewards: Vec<(Vec<Vec<f64>>, bool)>,
    values: Vec<Vec<Vec<f64>>>,
}

impl GroundTruth {
    pub fn compute(m: &Mdp, targets: &Targets) -> Result<Self, ExperimentError> {
        let rewards: Vec<_> = targets
            .sets
            .iter()
            .map(|set| evaluation_rewards(set, m.n_states()))
            .collect();
        let values = targets
            .policies
            .iter()
            .zip(&rewards)
            .map(|(pi, (rs, _))| rs.iter().map(|r| policy_value(m, pi, r)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { rewards, values })
    }

    pub fn value(&self, policy: usize, reward: usize) -> &[f64] {
        &self.values[policy][reward]
    }

    /// Errors of the estimate `m_hat` for every policy, tagged by reward id.
    pub fn errors(
        &self,
        m_hat: &Mdp,
        policies: &[DeterministicPolicy],
    ) -> Result<Vec<(usize, RewardId, f64)>, ExperimentError> {
        let mut out = Vec::new();
        for (i, pi) in policies.iter().enumerate() {
            let (rs, average) = &self.rewards[i];
            let mut errors = Vec::with_capacity(rs.len());
            for (j, r) in rs.iter().enumerate() {
                let v_hat = policy_value(m_hat, pi, r)?;
                errors.push(linf_distance(&v_hat, &self.values[i][j]));
            }
            if *average {
                out.push((i, RewardId::Average, errors.iter().sum::<f64>() / errors.len() as f64));
            } else {
                out.extend(errors.into_iter().enumerate().map(|(j, e)| (i, RewardId::Index(j), e)));
            }
        }
        Ok(out)
    }
}

pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `sup_{r ∈ set} ‖V̂_r − V_r‖∞` for one policy.
pub fn sup_error(m_hat: &Mdp, m: &Mdp, pi: &DeterministicPolicy, set: &RewardSet) -> Result<f64, ExperimentError> {
    match set {
        RewardSet::Finite(rs) => rs.iter().try_fold(0.0, |acc: f64, r| {
            Ok(acc.max(linf_distance(&policy_value(m_hat, pi, r)?, &policy_value(m, pi, r)?)))
        }),
        RewardSet::Box01 | RewardSet::Polytope(_) => {
            let diff = policy_matrices(m_hat, pi)?.fundamental - policy_matrices(m, pi)?.fundamental;
            let mut worst: f64 = 0.0;
            for s in 0..m.n_states() {
                let row: Vec<f64> = diff.row(s).iter().copied().collect();
                let (up, down) = match set {
                    RewardSet::Polytope(p) => {
                        let neg: Vec<f64> = row.iter().map(|x| -x).collect();
                        (p.maximize(&row)?, p.maximize(&neg)?)
                    }
                    _ => (
                        row.iter().filter(|x| **x > 0.0).sum(),
                        -row.iter().filter(|x| **x < 0.0).sum::<f64>(),
                    ),
                };
                worst = worst.max(up).max(down);
            }
            Ok(worst)
        }
    }
}

pub fn mrnas_config(spec: &AgentSpec, cfg: &ExperimentConfig) -> Result<MrNasConfig, ExperimentError> {
    let AgentSpec::MrNas {
        alpha,
        beta,
        recompute_period,
        method,
    } = *spec
    else {
        return Err(ExperimentError::Invalid(format!("`{}` is not mrnas", spec.name())));
    };
    let mut out = MrNasConfig::new(cfg.eps, cfg.delta, cfg.gamma)?.with_recompute_period(recompute_period)?;
    out.alpha = alpha;
    out.beta = beta;
    out.allocation.method = method;
    Ok(out)
}

pub fn make_agent(
    spec: &AgentSpec,
    m: &Mdp,
    targets: &Targets,
    cfg: &ExperimentConfig,
) -> Result<Box<dyn Agent>, ExperimentError> {
    let model = EmpiricalModel::for_mdp(m);
    Ok(match spec {
        AgentSpec::MrNas { .. } => Box::new(MrNas::for_mdp(m, targets.clone(), mrnas_config(spec, cfg)?)?),
        AgentSpec::NoisyUniform { eps } => Box::new(NoisyPolicy::new(
            model,
            &targets.policies,
            NoisyMode::Uniform { eps: *eps },
        )?),
        AgentSpec::NoisyVisitation => Box::new(NoisyPolicy::new(model, &targets.policies, NoisyMode::Visitation)?),
        AgentSpec::SfNr(c) => Box::new(SfNr::new(model, &targets.policies, *c)?),
        AgentSpec::Gvf(c) => Box::new(GvfExplorer::new(model, targets.clone(), *c)?),
    })
}

/// Draws the next state from the true model.
pub fn env_step(m: &Mdp, s: usize, a: usize, rng: &mut ChaCha8Rng) -> usize {
    sample_action(m.row(s, a), rng)
}

/// One agent on one seed for the configured horizon.
pub fn run_single(
    cfg: &ExperimentConfig,
    m: &Mdp,
    seed: u64,
    agent_index: usize,
    targets: &Targets,
    truth: &GroundTruth,
) -> Result<Vec<EvalRecord>, ExperimentError> {
    let spec = &cfg.agents[agent_index];
    let mut agent = make_agent(spec, m, targets, cfg)?;
    let mut rng = seed_rng(seed, agent_index as u64 + 1);
    let mut records = Vec::new();
    let mut s = 0;
    for t in 1..=cfg.horizon {
        let a = agent.act(s, &mut rng);
        let next = env_step(m, s, a, &mut rng);
        agent.observe(s, a, next)?;
        s = next;
        if t % cfg.eval_period == 0 {
            let estimate = agent.model().estimate();
            for (policy, reward, error) in truth.errors(&estimate, &targets.policies)? {
                records.push(EvalRecord {
                    seed,
                    agent: spec.name().to_string(),
                    step: t,
                    policy,
                    reward,
                    linf_error: round_sig(error),
                });
            }
        }
    }
    Ok(records)
}

/// Targets and ground truth of one seed.
pub fn seed_setup(cfg: &ExperimentConfig, m: &Mdp, seed: u64) -> Result<(Targets, GroundTruth), ExperimentError> {
    let targets = make_targets(&mut seed_rng(seed, 0), m, cfg)?;
    let truth = GroundTruth::compute(m, &targets)?;
    Ok((targets, truth))
}

/// Every (seed, agent) run of the configuration, sorted by
/// `(seed, agent, step, policy, reward)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<EvalRecord>, ExperimentError> {
    cfg.validate()?;
    if cfg.agents.is_empty() {
        return Err(ExperimentError::Invalid("no agents configured".into()));
    }
    let m = cfg.env.build(cfg.gamma)?;
    let setups = cfg
        .seeds
        .par_iter()
        .map(|&seed| seed_setup(cfg, &m, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.seeds.len())
        .flat_map(|i| (0..cfg.agents.len()).map(move |k| (i, k)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, k)| {
            let (targets, truth) = &setups[i];
            run_single(cfg, &m, cfg.seeds[i], k, targets, truth)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut records: Vec<EvalRecord> = runs.into_iter().flatten().collect();
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(records)
}
