//! A two-state MDP whose set of confusing models is not convex.
//!
//! States `s1 = 0`, `s2 = 1`, actions `a1 = 0`, `a2 = 1`; the evaluated
//! policy plays `a2` in `s1` and `a1` in `s2`. From `s1`, `a2` self-loops with
//! probability `p2` paying `r2`, otherwise moves to `s2` paying nothing. From
//! `s2`, `a1` returns to `s1` with probability `p3`. Because the reward of
//! `(s1, a2)` is paid only on the self-loop, its expected value `p2·r2`
//! changes together with `p2`.

use crate::deviation::value_gap_between;
use crate::mdp::{policy_value, DeterministicPolicy, Mdp, MdpError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateExample {
    pub gamma: f64,
    /// Reward and self-loop probability of `a1` in `s1`; unused by the evaluated policy.
    pub r1: f64,
    pub p1: f64,
    pub r2: f64,
    pub p2: f64,
    pub p3: f64,
}

impl Default for TwoStateExample {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            r1: 0.0,
            p1: 0.9,
            r2: 0.5,
            p2: 0.5,
            p3: 0.01,
        }
    }
}

impl TwoStateExample {
    pub fn with_p2(self, p2: f64) -> Self {
        Self { p2, ..self }
    }

    pub fn mdp(&self) -> Result<Mdp, MdpError> {
        let (p1, p2, p3) = (self.p1, self.p2, self.p3);
        Mdp::new(
            2,
            2,
            vec![p1, 1.0 - p1, p2, 1.0 - p2, p3, 1.0 - p3, 0.0, 1.0],
            self.gamma,
        )
    }

    pub fn policy() -> DeterministicPolicy {
        DeterministicPolicy::new(vec![1, 0], 2).expect("actions are in range")
    }

    /// Expected one-step reward under the evaluated policy.
    pub fn reward(&self) -> Vec<f64> {
        vec![self.p2 * self.r2, 0.0]
    }

    pub fn values(&self) -> Result<Vec<f64>, MdpError> {
        policy_value(&self.mdp()?, &Self::policy(), &self.reward())
    }

    /// Closed form `V(s1) = p2·r2 / (1 − γ(p2 + (1 − p2)θ))`, `θ = γp3 / (1 − γ(1 − p3))`.
    pub fn closed_form_value(&self) -> (f64, f64) {
        let g = self.gamma;
        let theta = g * self.p3 / (1.0 - g * (1.0 - self.p3));
        let v1 = self.p2 * self.r2 / (1.0 - g * (self.p2 + (1.0 - self.p2) * theta));
        (v1, theta * v1)
    }

    /// `‖V − V'‖∞` between this model and the same model with `p2` replaced.
    pub fn gap_to(&self, p2_alt: f64) -> Result<f64, MdpError> {
        let alt = self.with_p2(p2_alt);
        value_gap_between(
            &self.mdp()?,
            &self.reward(),
            &alt.mdp()?,
            &alt.reward(),
            &Self::policy(),
        )
    }
}

/// `(p2, gap)` pairs for the default example over a grid of alternative `p2`.
pub fn nonconvexity_curve(p2_grid: &[f64]) -> Result<Vec<(f64, f64)>, MdpError> {
    let base = TwoStateExample::default();
    p2_grid
        .iter()
        .map(|&p2| {
            if !(p2 > 0.0 && p2 < 1.0) {
                return Err(MdpError::IndexOutOfRange(format!("p2 = {p2}")));
            }
            Ok((p2, base.gap_to(p2)?))
        })
        .collect()
}
