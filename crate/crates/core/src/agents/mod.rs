//! Exploration agents sharing a behavior-policy contract.
//!
//! An agent exposes its behavior distribution at the current state, samples
//! an action from it and records the observed transition in its empirical
//! model. Value estimates are always computed from that model.

mod gvf;
mod mrnas;
mod noisy;
mod sfnr;
pub mod stopping;

pub use gvf::{return_variance, GvfConfig, GvfExplorer};
pub use mrnas::{forcing_policy, MrNas, MrNasConfig};
pub use noisy::{policy_mixture, NoisyMode, NoisyPolicy};
pub use sfnr::{SfNr, SfNrConfig};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;
use thiserror::Error;

use crate::allocation::AllocationError;
use crate::mdp::{DeterministicPolicy, EmpiricalModel, MdpError};
use crate::rewards::{RewardError, RewardSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("agent needs at least one target policy")]
    NoTargets,
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
}

pub trait Agent: Send {
    fn name(&self) -> &str;

    /// Behavior distribution over actions at state `s`.
    fn policy_row(&mut self, s: usize) -> Vec<f64>;

    /// Records the transition `(s, a, next)`.
    fn observe(&mut self, s: usize, a: usize, next: usize) -> Result<(), AgentError>;

    fn model(&self) -> &EmpiricalModel;

    fn act(&mut self, s: usize, rng: &mut dyn RngCore) -> usize {
        let row = self.policy_row(s);
        sample_action(&row, rng)
    }
}

/// Draws an index from a probability vector.
pub fn sample_action(row: &[f64], rng: &mut dyn RngCore) -> usize {
    WeightedIndex::new(row)
        .expect("behavior rows are valid distributions")
        .sample(rng)
}

/// Target policies and their reward sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub policies: Vec<DeterministicPolicy>,
    pub sets: Vec<RewardSet>,
}

impl Targets {
    pub fn new(policies: Vec<DeterministicPolicy>, sets: Vec<RewardSet>) -> Result<Self, AgentError> {
        if policies.is_empty() {
            return Err(AgentError::NoTargets);
        }
        if policies.len() != sets.len() {
            return Err(AgentError::InvalidConfig(format!(
                "{} policies but {} reward sets",
                policies.len(),
                sets.len()
            )));
        }
        Ok(Self { policies, sets })
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }
}

/// `(1 − ε)·p + ε·q`, entrywise.
pub(crate) fn mix(p: &[f64], q: &[f64], eps: f64) -> Vec<f64> {
    p.iter().zip(q).map(|(a, b)| (1.0 - eps) * a + eps * b).collect()
}

pub(crate) fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Numerically stable softmax.
pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}
