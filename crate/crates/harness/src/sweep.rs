//! Optimal allocations across environment sizes.

use mrpe_core::allocation::{solve_allocation, AllocationConfig, Occupancy};
use mrpe_core::rewards::{complexity_matrix, sample_finite_rewards, RewardSet};

use crate::config::{ExperimentConfig, RewardMode};
use crate::experiment::{default_policy, seed_rng, ExperimentError};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub param: usize,
    pub u_star: f64,
    pub set_label: String,
    pub omega: Occupancy,
}

/// `U*_ε` for the environment's default target policy at every size in
/// `cfg.sweep` (or the configured size when the sweep is empty).
pub fn complexity_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>, ExperimentError> {
    cfg.validate()?;
    let sizes = if cfg.sweep.is_empty() {
        vec![cfg.env.size()]
    } else {
        cfg.sweep.clone()
    };
    let mut points = Vec::with_capacity(sizes.len());
    for n in sizes {
        let spec = cfg.env.with_size(n);
        let m = spec.build(cfg.gamma)?;
        let pi = default_policy(&spec, &m)?;
        let set = match cfg.reward_mode {
            RewardMode::Finite { k } => sample_finite_rewards(&mut seed_rng(cfg.seeds[0], 0), m.n_states(), k)?,
            _ => RewardSet::Box01,
        };
        let policies = [pi];
        let cm = complexity_matrix(&m, &policies, std::slice::from_ref(&set), true)?;
        let result = solve_allocation(&m, &cm, &policies, cfg.eps, &AllocationConfig::default())?;
        points.push(SweepPoint {
            param: n,
            u_star: result.u_value,
            set_label: cfg.reward_mode.to_string(),
            omega: result.omega,
        });
    }
    Ok(points)
}
