//! Target-policy mixtures with uniform noise.

use crate::mdp::{DeterministicPolicy, EmpiricalModel};

use super::{mix, uniform, Agent, AgentError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoisyMode {
    /// Constant mixing factor.
    Uniform { eps: f64 },
    /// Mixing factor `1/max(1, N_t(s))`.
    Visitation,
}

/// `π_mix(a|s) = |{π : π(s) = a}| / |Π|`, state-major.
pub fn policy_mixture(policies: &[DeterministicPolicy], n_states: usize, n_actions: usize) -> Vec<f64> {
    let mut rows = vec![0.0; n_states * n_actions];
    let weight = 1.0 / policies.len() as f64;
    for pi in policies {
        for s in 0..n_states {
            rows[s * n_actions + pi.action(s)] += weight;
        }
    }
    rows
}

#[derive(Debug, Clone)]
pub struct NoisyPolicy {
    name: &'static str,
    mode: NoisyMode,
    mixture: Vec<f64>,
    model: EmpiricalModel,
}

impl NoisyPolicy {
    pub fn new(model: EmpiricalModel, policies: &[DeterministicPolicy], mode: NoisyMode) -> Result<Self, AgentError> {
        if policies.is_empty() {
            return Err(AgentError::NoTargets);
        }
        if let NoisyMode::Uniform { eps } = mode {
            if !(0.0..=1.0).contains(&eps) {
                return Err(AgentError::InvalidConfig(format!("mixing factor {eps} outside [0, 1]")));
            }
        }
        let name = match mode {
            NoisyMode::Uniform { .. } => "noisy-uniform",
            NoisyMode::Visitation => "noisy-visitation",
        };
        let mixture = policy_mixture(policies, model.n_states(), model.n_actions());
        Ok(Self {
            name,
            mode,
            mixture,
            model,
        })
    }
}

impl Agent for NoisyPolicy {
    fn name(&self) -> &str {
        self.name
    }

    fn policy_row(&mut self, s: usize) -> Vec<f64> {
        let na = self.model.n_actions();
        let eps = match self.mode {
            NoisyMode::Uniform { eps } => eps,
            NoisyMode::Visitation => 1.0 / self.model.state_visits(s).max(1) as f64,
        };
        mix(&self.mixture[s * na..(s + 1) * na], &uniform(na), eps)
    }

    fn observe(&mut self, s: usize, a: usize, next: usize) -> Result<(), AgentError> {
        Ok(self.model.update(s, a, next)?)
    }

    fn model(&self) -> &EmpiricalModel {
        &self.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_target_uniform_mode() {
        let pi = DeterministicPolicy::constant(2, 1);
        let mut agent =
            NoisyPolicy::new(EmpiricalModel::new(2, 2, 0.9), &[pi], NoisyMode::Uniform { eps: 0.3 }).unwrap();
        let row = agent.policy_row(0);
        assert!((row[1] - 0.85).abs() < 1e-12);
    }

    #[test]
    fn visitation_mode_is_uniform_after_one_visit() {
        let pi = DeterministicPolicy::constant(2, 1);
        let mut agent = NoisyPolicy::new(EmpiricalModel::new(2, 2, 0.9), &[pi], NoisyMode::Visitation).unwrap();
        agent.observe(0, 1, 1).unwrap();
        assert_eq!(agent.policy_row(0), vec![0.5, 0.5]);
    }

    #[test]
    fn identical_targets_give_indicator() {
        let pi = DeterministicPolicy::new(vec![0, 1], 2).unwrap();
        let mixture = policy_mixture(&[pi.clone(), pi.clone(), pi], 2, 2);
        assert_eq!(mixture, vec![1.0, 0.0, 0.0, 1.0]);
    }
}
