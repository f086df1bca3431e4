//! Monte-Carlo check of the stopping rule: run MR-NaS until it stops and
//! measure the worst value error of its final estimate.

use mrpe_core::agents::{Agent, MrNas};
use rayon::prelude::*;

use crate::config::{AgentSpec, ExperimentConfig};
use crate::experiment::{env_step, mrnas_config, seed_rng, seed_setup, sup_error, ExperimentError};

#[derive(Debug, Clone, PartialEq)]
pub struct StopRun {
    pub seed: u64,
    pub stopped: bool,
    pub steps: u64,
    /// `max_{π, r ∈ R_π} ‖V̂ − V‖∞` at the final step.
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingReport {
    pub eps: f64,
    pub delta: f64,
    pub runs: Vec<StopRun>,
}

impl StoppingReport {
    /// Fraction of runs whose final error exceeds `ε`.
    pub fn failure_rate(&self) -> f64 {
        let failures = self.runs.iter().filter(|r| r.max_error > self.eps).count();
        failures as f64 / self.runs.len() as f64
    }

    pub fn all_stopped(&self) -> bool {
        self.runs.iter().all(|r| r.stopped)
    }

    pub fn max_steps(&self) -> u64 {
        self.runs.iter().map(|r| r.steps).max().unwrap_or(0)
    }
}

fn run_once(cfg: &ExperimentConfig, spec: &AgentSpec, seed: u64) -> Result<StopRun, ExperimentError> {
    let m = cfg.env.build(cfg.gamma)?;
    let (targets, _) = seed_setup(cfg, &m, seed)?;
    let mut agent = MrNas::for_mdp(&m, targets.clone(), mrnas_config(spec, cfg)?)?;
    let mut rng = seed_rng(seed, 1);
    let mut s = 0;
    let mut stopped = false;
    let mut t = 0;
    while t < cfg.max_steps {
        let a = agent.act(s, &mut rng);
        let next = env_step(&m, s, a, &mut rng);
        agent.observe(s, a, next)?;
        s = next;
        t += 1;
        if agent.should_stop()? {
            stopped = true;
            break;
        }
    }
    let estimate = agent.model().estimate();
    let mut max_error: f64 = 0.0;
    for (pi, set) in targets.policies.iter().zip(&targets.sets) {
        max_error = max_error.max(sup_error(&estimate, &m, pi, set)?);
    }
    Ok(StopRun {
        seed,
        stopped,
        steps: t,
        max_error,
    })
}

/// Runs seeds `0..cfg.runs` with the configured MR-NaS hyperparameters (or
/// the defaults when no `mrnas` agent is listed).
pub fn stopping_check(cfg: &ExperimentConfig) -> Result<StoppingReport, ExperimentError> {
    cfg.validate()?;
    let spec = cfg
        .agents
        .iter()
        .find(|a| matches!(a, AgentSpec::MrNas { .. }))
        .cloned()
        .unwrap_or_else(AgentSpec::mrnas);
    let runs = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|seed| run_once(cfg, &spec, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StoppingReport {
        eps: cfg.eps,
        delta: cfg.delta,
        runs,
    })
}
