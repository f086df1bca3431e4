//! SF-NR: successor-feature exploration driven by the change in the features.
//!
//! Each target policy keeps a scalar successor table `ψ_π(s,a)` learned by TD
//! with unit cumulant. A behavior table `π_β` is learned by TD on the mean
//! `ℓ1` change of the `ψ` tables, and actions are drawn from a softmax over
//! `π_β` mixed with uniform noise.

use crate::mdp::{DeterministicPolicy, EmpiricalModel};

use super::{mix, softmax, uniform, Agent, AgentError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfNrConfig {
    pub temperature: f64,
    /// Discount of the successor tables.
    pub gamma_psi: f64,
}

impl Default for SfNrConfig {
    fn default() -> Self {
        Self {
            temperature: 2.0,
            gamma_psi: 0.99,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SfNr {
    cfg: SfNrConfig,
    policies: Vec<DeterministicPolicy>,
    model: EmpiricalModel,
    psi: Vec<Vec<f64>>,
    behavior_values: Vec<f64>,
    last_change: f64,
}

impl SfNr {
    pub fn new(model: EmpiricalModel, policies: &[DeterministicPolicy], cfg: SfNrConfig) -> Result<Self, AgentError> {
        if policies.is_empty() {
            return Err(AgentError::NoTargets);
        }
        if !(cfg.temperature > 0.0) || !(0.0..1.0).contains(&cfg.gamma_psi) {
            return Err(AgentError::InvalidConfig(format!(
                "temperature = {}, gamma_psi = {}",
                cfg.temperature, cfg.gamma_psi
            )));
        }
        let n = model.n_states() * model.n_actions();
        Ok(Self {
            cfg,
            policies: policies.to_vec(),
            psi: vec![vec![1.0; n]; policies.len()],
            behavior_values: vec![1.0 / model.n_actions() as f64; n],
            model,
            last_change: 0.0,
        })
    }

    pub fn psi(&self, policy: usize, s: usize, a: usize) -> f64 {
        self.psi[policy][s * self.model.n_actions() + a]
    }

    pub fn behavior_value(&self, s: usize, a: usize) -> f64 {
        self.behavior_values[s * self.model.n_actions() + a]
    }

    /// Mean `ℓ1` change of the successor tables at the last update.
    pub fn last_change(&self) -> f64 {
        self.last_change
    }
}

impl Agent for SfNr {
    fn name(&self) -> &str {
        "sfnr"
    }

    fn policy_row(&mut self, s: usize) -> Vec<f64> {
        let na = self.model.n_actions();
        let scaled: Vec<f64> = self.behavior_values[s * na..(s + 1) * na]
            .iter()
            .map(|v| v / self.cfg.temperature)
            .collect();
        let eps = 1.0 / self.model.state_visits(s).max(1) as f64;
        mix(&softmax(&scaled), &uniform(na), eps)
    }

    fn observe(&mut self, s: usize, a: usize, next: usize) -> Result<(), AgentError> {
        self.model.update(s, a, next)?;
        let na = self.model.n_actions();
        let k = s * na + a;
        let step = 1.0 / self.model.visits(s, a) as f64;
        let mut change = 0.0;
        for (psi, pi) in self.psi.iter_mut().zip(&self.policies) {
            let td = 1.0 + self.cfg.gamma_psi * psi[next * na + pi.action(next)] - psi[k];
            psi[k] += step * td;
            change += (step * td).abs();
        }
        self.last_change = change / self.policies.len() as f64;
        let best_next = self.behavior_values[next * na..(next + 1) * na]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let gamma = self.model.discount();
        self.behavior_values[k] += step * (self.last_change + gamma * best_next - self.behavior_values[k]);
        Ok(())
    }

    fn model(&self) -> &EmpiricalModel {
        &self.model
    }
}
