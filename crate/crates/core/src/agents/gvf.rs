//! GVFExplorer: sample actions in proportion to the square root of the
//! return variance of the targets, estimated on the current model.

use nalgebra::{DMatrix, DVector};

use crate::mdp::{policy_value, DeterministicPolicy, EmpiricalModel, Mdp, MdpError};
use crate::rewards::RewardSet;

use super::{mix, uniform, Agent, AgentError, Targets};

/// `Λ(s,a)`, the variance of the discounted return from `(s, a)` when `π` is
/// followed afterwards and rewards are deterministic:
/// `Λ(s,a) = γ² Var_{s'~P(s,a)} V(s') + γ² Σ_{s'} P(s'|s,a) Λ(s', π(s'))`.
pub fn return_variance(m: &Mdp, pi: &DeterministicPolicy, r: &[f64]) -> Result<DMatrix<f64>, MdpError> {
    let v = policy_value(m, pi, r)?;
    let n = m.n_states();
    let g2 = m.discount() * m.discount();
    let variance = |row: &[f64]| {
        let mean: f64 = row.iter().zip(&v).map(|(p, x)| p * x).sum();
        row.iter()
            .zip(&v)
            .map(|(p, x)| p * (x - mean) * (x - mean))
            .sum::<f64>()
    };
    let local = DVector::from_fn(n, |s, _| g2 * variance(m.row(s, pi.action(s))));
    let system = DMatrix::from_fn(n, n, |s, next| {
        let id = if s == next { 1.0 } else { 0.0 };
        id - g2 * m.prob(s, pi.action(s), next)
    });
    let on_policy = system.lu().solve(&local).ok_or(MdpError::SingularSystem)?;
    Ok(DMatrix::from_fn(n, m.n_actions(), |s, a| {
        let row = m.row(s, a);
        let carried: f64 = row.iter().zip(on_policy.iter()).map(|(p, l)| p * l).sum();
        (g2 * variance(row) + g2 * carried).max(0.0)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GvfConfig {
    pub mix: f64,
    /// Steps between variance re-estimates.
    pub recompute_period: u64,
}

impl Default for GvfConfig {
    fn default() -> Self {
        Self {
            mix: 0.3,
            recompute_period: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GvfExplorer {
    cfg: GvfConfig,
    targets: Targets,
    model: EmpiricalModel,
    /// `Σ_π π(a|s) Var^π(s,a)`, state-major.
    weights: Vec<f64>,
    last_refresh: u64,
}

/// Reward vectors whose return variances are tracked for one policy.
fn tracked_rewards(set: &RewardSet, n_states: usize) -> Vec<Vec<f64>> {
    match set {
        RewardSet::Finite(rs) => rs.clone(),
        RewardSet::Box01 | RewardSet::Polytope(_) => (0..n_states)
            .map(|i| (0..n_states).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
    }
}

impl GvfExplorer {
    pub fn new(model: EmpiricalModel, targets: Targets, cfg: GvfConfig) -> Result<Self, AgentError> {
        if targets.is_empty() {
            return Err(AgentError::NoTargets);
        }
        if !(0.0..=1.0).contains(&cfg.mix) || cfg.recompute_period == 0 {
            return Err(AgentError::InvalidConfig(format!(
                "mix = {}, recompute_period = {}",
                cfg.mix, cfg.recompute_period
            )));
        }
        let na = model.n_actions();
        let mut weights = vec![0.0; model.n_states() * na];
        // Every variance starts at one.
        for pi in &targets.policies {
            for s in 0..model.n_states() {
                weights[s * na + pi.action(s)] += 1.0;
            }
        }
        Ok(Self {
            cfg,
            targets,
            model,
            weights,
            last_refresh: 0,
        })
    }

    fn refresh(&mut self) -> Result<(), AgentError> {
        let estimate = self.model.estimate();
        let na = estimate.n_actions();
        let mut weights = vec![0.0; estimate.n_states() * na];
        for (pi, set) in self.targets.policies.iter().zip(&self.targets.sets) {
            let rewards = tracked_rewards(set, estimate.n_states());
            let scale = 1.0 / rewards.len() as f64;
            for r in &rewards {
                let lambda = return_variance(&estimate, pi, r)?;
                for s in 0..estimate.n_states() {
                    let a = pi.action(s);
                    weights[s * na + a] += scale * lambda[(s, a)];
                }
            }
        }
        self.weights = weights;
        self.last_refresh = self.model.total();
        Ok(())
    }
}

impl Agent for GvfExplorer {
    fn name(&self) -> &str {
        "gvf"
    }

    fn policy_row(&mut self, s: usize) -> Vec<f64> {
        let na = self.model.n_actions();
        let roots: Vec<f64> = self.weights[s * na..(s + 1) * na].iter().map(|w| w.sqrt()).collect();
        let total: f64 = roots.iter().sum();
        let base = if total > 0.0 {
            roots.iter().map(|x| x / total).collect()
        } else {
            uniform(na)
        };
        mix(&base, &uniform(na), self.cfg.mix)
    }

    fn observe(&mut self, s: usize, a: usize, next: usize) -> Result<(), AgentError> {
        self.model.update(s, a, next)?;
        if self.model.total() - self.last_refresh >= self.cfg.recompute_period {
            self.refresh()?;
        }
        Ok(())
    }

    fn model(&self) -> &EmpiricalModel {
        &self.model
    }
}
