//! The stopping rule: stop once `t ≥ U_{ε/2}(N_t/t; M_t)·β(N_t, δ)`.
//!
//! Since `U_{ε/2}(N_t/t) = t·max_{i,s} k_{ε/2} A_i(s) / N_t(s, π_i(s))`, the
//! factor `t` cancels and the rule reduces to
//! `max_{i,s} k_{ε/2} A_i(s) / N_t(s, π_i(s)) · β(N_t, δ) ≤ 1`.

use crate::allocation::{complexity_scale, evaluate_u, Occupancy};
use crate::mdp::{DeterministicPolicy, EmpiricalModel};
use crate::rewards::ComplexityMatrix;

use super::AgentError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingConfig {
    pub eps: f64,
    pub delta: f64,
    pub recompute_period: u64,
}

impl StoppingConfig {
    /// Checks `ε ∈ (0, 1/(2(1−γ)))`, `δ ∈ (0, 1/2)` and a positive period.
    pub fn new(eps: f64, delta: f64, recompute_period: u64, gamma: f64) -> Result<Self, AgentError> {
        let eps_max = 1.0 / (2.0 * (1.0 - gamma));
        if !(eps > 0.0 && eps < eps_max) {
            return Err(AgentError::InvalidConfig(format!("eps = {eps} outside (0, {eps_max})")));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(AgentError::InvalidConfig(format!("delta = {delta} outside (0, 0.5)")));
        }
        if recompute_period == 0 {
            return Err(AgentError::InvalidConfig("recompute period must be positive".into()));
        }
        Ok(Self {
            eps,
            delta,
            recompute_period,
        })
    }
}

/// `β(N, δ) = log(1/δ) + (S−1) Σ_{s,a} log(e(1 + N(s,a)/(S−1)))`.
pub fn stopping_threshold(counts: &[u64], delta: f64, n_states: usize) -> f64 {
    let base = (1.0 / delta).ln();
    if n_states <= 1 {
        return base;
    }
    let k = (n_states - 1) as f64;
    let sum: f64 = counts.iter().map(|&n| 1.0 + (n as f64 / k).ln_1p()).sum();
    base + k * sum
}

/// `t ≥ U_{ε/2}(N_t/t; M_t)·β(N_t, δ)`, with `cm` the complexity matrix of `M_t`.
///
/// Returns false while a required pair is unvisited.
pub fn should_stop(
    model: &EmpiricalModel,
    t: u64,
    cm: &ComplexityMatrix,
    policies: &[DeterministicPolicy],
    cfg: &StoppingConfig,
) -> Result<bool, AgentError> {
    if t == 0 {
        return Ok(false);
    }
    let omega: Vec<f64> = model.visit_counts().iter().map(|&n| n as f64 / t as f64).collect();
    let omega = Occupancy::new(model.n_states(), model.n_actions(), omega)?;
    let u = evaluate_u(&omega, cm, policies, model.discount(), cfg.eps / 2.0)?;
    if !u.is_finite() {
        return Ok(false);
    }
    let beta = stopping_threshold(model.visit_counts(), cfg.delta, model.n_states());
    Ok(t as f64 >= u * beta)
}

/// Maintains `β(N_t, δ)` incrementally as counts grow by one.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTracker {
    n_states: usize,
    base: f64,
    sum: f64,
}

impl ThresholdTracker {
    pub fn new(n_states: usize, n_actions: usize, delta: f64) -> Self {
        Self {
            n_states,
            base: (1.0 / delta).ln(),
            sum: (n_states * n_actions) as f64,
        }
    }

    /// Accounts for one more visit to a pair previously seen `previous` times.
    pub fn record(&mut self, previous: u64) {
        if self.n_states > 1 {
            let k = (self.n_states - 1) as f64;
            self.sum += ((k + previous as f64 + 1.0) / (k + previous as f64)).ln();
        }
    }

    pub fn value(&self) -> f64 {
        if self.n_states <= 1 {
            self.base
        } else {
            self.base + (self.n_states - 1) as f64 * self.sum
        }
    }
}

/// `max_{i,s} k_{ε/2} A_i(s) / N(s, π_i(s))`, infinite while a required pair is unvisited.
pub fn stopping_statistic(
    model: &EmpiricalModel,
    cm: &ComplexityMatrix,
    policies: &[DeterministicPolicy],
    eps: f64,
) -> f64 {
    let k = complexity_scale(model.discount(), eps / 2.0);
    let mut worst: f64 = 0.0;
    for (i, pi) in policies.iter().enumerate() {
        for s in 0..model.n_states() {
            let a = cm.get(i, s);
            if a <= 0.0 {
                continue;
            }
            let n = model.visits(s, pi.action(s));
            if n == 0 {
                return f64::INFINITY;
            }
            worst = worst.max(k * a / n as f64);
        }
    }
    worst
}
