//! Bootstrap confidence intervals and per-agent error curves.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::experiment::EvalRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("confidence level {0} outside (0, 1)")]
    Level(String),
}

/// Percentile bootstrap interval of the mean: `(low, mean, high)`.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    values: &[f64],
    level: f64,
    resamples: usize,
    rng: &mut R,
) -> Result<(f64, f64, f64), StatsError> {
    if values.is_empty() || resamples == 0 {
        return Err(StatsError::EmptySample);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Level(level.to_string()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&means, tail), mean, quantile(&means, 1.0 - tail)))
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(quantile(&sorted, 0.5))
}

/// Per agent and step, the error of every seed averaged over its
/// (policy, reward) records, in seed order.
pub fn seed_errors(records: &[EvalRecord]) -> BTreeMap<(String, u64), Vec<f64>> {
    let mut sums: BTreeMap<(String, u64, u64), (f64, usize)> = BTreeMap::new();
    for r in records {
        let slot = sums.entry((r.agent.clone(), r.step, r.seed)).or_insert((0.0, 0));
        slot.0 += r.linf_error;
        slot.1 += 1;
    }
    let mut out: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for ((agent, step, _), (sum, count)) in sums {
        out.entry((agent, step)).or_default().push(sum / count as f64);
    }
    out
}

/// Median over seeds of the per-seed mean error, as `(step, median)` per agent.
pub fn median_curves(records: &[EvalRecord]) -> BTreeMap<String, Vec<(u64, f64)>> {
    let mut out: BTreeMap<String, Vec<(u64, f64)>> = BTreeMap::new();
    for ((agent, step), errors) in seed_errors(records) {
        let m = median(&errors).expect("at least one seed per entry");
        out.entry(agent).or_default().push((step, m));
    }
    out
}
