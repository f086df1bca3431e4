//! MR-NaS: track the optimal occupancy of the current model estimate.
//!
//! Every `recompute_period` steps the allocation minimizing `U_{ε/2}` is
//! recomputed on `M_t` (certainty equivalence). The behavior policy mixes the
//! allocation's conditional `π*(a|s) = ω*(s,a)/Σ_b ω*(s,b)` with a forcing
//! policy that favours under-sampled actions.

use crate::allocation::{solve_allocation, AllocationConfig};
use crate::mdp::{EmpiricalModel, Mdp, StochasticPolicy};
use crate::rewards::{complexity_matrix, ComplexityMatrix};

use super::stopping::{should_stop, stopping_statistic, StoppingConfig, ThresholdTracker};
use super::{mix, softmax, Agent, AgentError, Targets};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrNasConfig {
    pub stopping: StoppingConfig,
    /// Exponent of the mixing factor `ε_t = 1/max(1, N_t(s))^α`.
    pub alpha: f64,
    /// Temperature scale of the forcing policy.
    pub beta: f64,
    pub allocation: AllocationConfig,
}

impl MrNasConfig {
    pub fn new(eps: f64, delta: f64, gamma: f64) -> Result<Self, AgentError> {
        Ok(Self {
            stopping: StoppingConfig::new(eps, delta, 500, gamma)?,
            alpha: 0.99,
            beta: 0.01,
            allocation: AllocationConfig::default(),
        })
    }

    pub fn with_recompute_period(mut self, period: u64) -> Result<Self, AgentError> {
        if period == 0 {
            return Err(AgentError::InvalidConfig("recompute period must be positive".into()));
        }
        self.stopping.recompute_period = period;
        Ok(self)
    }
}

/// `softmax(−β_t N(s,·))` with `β_t = β·log(max(N(s),1)) / max(1, max_a N(s,a) − min_b N(s,b))`.
pub fn forcing_policy(counts: &[u64], beta: f64) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let max = counts.iter().copied().max().unwrap_or(0);
    let min = counts.iter().copied().min().unwrap_or(0);
    let spread = ((max - min) as f64).max(1.0);
    let beta_t = beta * (total.max(1) as f64).ln() / spread;
    let logits: Vec<f64> = counts.iter().map(|&n| -beta_t * n as f64).collect();
    softmax(&logits)
}

#[derive(Debug, Clone)]
pub struct MrNas {
    targets: Targets,
    cfg: MrNasConfig,
    model: EmpiricalModel,
    behavior: Option<StochasticPolicy>,
    complexity: Option<ComplexityMatrix>,
    last_refresh: u64,
    refreshes: usize,
    last_u: f64,
    threshold: ThresholdTracker,
}

impl MrNas {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        targets: Targets,
        cfg: MrNasConfig,
    ) -> Result<Self, AgentError> {
        if targets.is_empty() {
            return Err(AgentError::NoTargets);
        }
        if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) || !(cfg.beta >= 0.0 && cfg.beta <= 1.0) {
            return Err(AgentError::InvalidConfig(format!(
                "alpha = {}, beta = {}",
                cfg.alpha, cfg.beta
            )));
        }
        Ok(Self {
            targets,
            cfg,
            model: EmpiricalModel::new(n_states, n_actions, gamma),
            behavior: None,
            complexity: None,
            last_refresh: 0,
            refreshes: 0,
            last_u: f64::INFINITY,
            threshold: ThresholdTracker::new(n_states, n_actions, cfg.stopping.delta),
        })
    }

    pub fn for_mdp(m: &Mdp, targets: Targets, cfg: MrNasConfig) -> Result<Self, AgentError> {
        Self::new(m.n_states(), m.n_actions(), m.discount(), targets, cfg)
    }

    /// Number of allocation recomputations so far.
    pub fn refreshes(&self) -> usize {
        self.refreshes
    }

    /// `U_{ε/2}` of the last computed allocation.
    pub fn last_u(&self) -> f64 {
        self.last_u
    }

    pub fn behavior(&self) -> Option<&StochasticPolicy> {
        self.behavior.as_ref()
    }

    fn refresh_complexity(&mut self, estimate: &Mdp) -> Result<ComplexityMatrix, AgentError> {
        let cm = complexity_matrix(estimate, &self.targets.policies, &self.targets.sets, true)?;
        self.complexity = Some(cm.clone());
        Ok(cm)
    }

    /// Recomputes the allocation on the current estimate. A failed solve
    /// leaves the uniform policy in place of `π*`.
    fn refresh(&mut self) {
        let estimate = self.model.estimate();
        let solved = self.refresh_complexity(&estimate).and_then(|cm| {
            let eps = self.cfg.stopping.eps / 2.0;
            Ok(solve_allocation(
                &estimate,
                &cm,
                &self.targets.policies,
                eps,
                &self.cfg.allocation,
            )?)
        });
        match solved {
            Ok(result) => {
                self.last_u = result.u_value;
                self.behavior = Some(result.omega.policy());
            }
            Err(_) => {
                self.last_u = f64::INFINITY;
                self.behavior = Some(StochasticPolicy::uniform(self.model.n_states(), self.model.n_actions()));
            }
        }
        self.last_refresh = self.model.total();
        self.refreshes += 1;
    }

    fn due(&self) -> bool {
        self.behavior.is_none() || self.model.total() - self.last_refresh >= self.cfg.stopping.recompute_period
    }

    /// The stopping rule at the current step.
    ///
    /// A cheap check against the complexity matrix of the last refresh runs
    /// first; when it passes, the matrix is recomputed on the current estimate
    /// and the rule is evaluated exactly.
    pub fn should_stop(&mut self) -> Result<bool, AgentError> {
        let t = self.model.total();
        if t == 0 {
            return Ok(false);
        }
        if self.complexity.is_none() {
            self.refresh_complexity(&self.model.estimate())?;
        }
        let cm = self.complexity.as_ref().expect("computed above");
        let statistic = stopping_statistic(&self.model, cm, &self.targets.policies, self.cfg.stopping.eps);
        if statistic * self.threshold.value() > 1.0 {
            return Ok(false);
        }
        let estimate = self.model.estimate();
        let cm = self.refresh_complexity(&estimate)?;
        should_stop(&self.model, t, &cm, &self.targets.policies, &self.cfg.stopping)
    }
}

impl Agent for MrNas {
    fn name(&self) -> &str {
        "mrnas"
    }

    fn policy_row(&mut self, s: usize) -> Vec<f64> {
        if self.due() {
            self.refresh();
        }
        let na = self.model.n_actions();
        let counts: Vec<u64> = (0..na).map(|a| self.model.visits(s, a)).collect();
        let n_s = self.model.state_visits(s).max(1) as f64;
        let eps_t = 1.0 / n_s.powf(self.cfg.alpha);
        let forcing = forcing_policy(&counts, self.cfg.beta);
        let target = self.behavior.as_ref().expect("refreshed above").row(s);
        mix(target, &forcing, eps_t)
    }

    fn observe(&mut self, s: usize, a: usize, next: usize) -> Result<(), AgentError> {
        let previous = self.model.visits(s, a);
        self.model.update(s, a, next)?;
        self.threshold.record(previous);
        Ok(())
    }

    fn model(&self) -> &EmpiricalModel {
        &self.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forcing_cold_start_is_uniform() {
        assert_eq!(forcing_policy(&[0, 0, 0], 0.01), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn forcing_with_zero_beta_is_uniform() {
        let row = forcing_policy(&[100, 3], 0.0);
        assert!((row[0] - 0.5).abs() < 1e-15 && (row[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn forcing_prefers_undersampled() {
        let row = forcing_policy(&[100, 3], 1.0);
        assert!(row[1] > row[0]);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
