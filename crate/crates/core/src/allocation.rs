//! Relaxed characteristic time and its minimization over stationary occupancies.
//!
//! For an occupancy `ω` over state-action pairs,
//! `U_ε(ω) = max_{i,s} A_i(s)·k_ε / ω(s, π_i(s))` with
//! `k_ε = γ² / (2ε²(1−γ)²)`. Minimizing `U_ε` over the flow polytope is a
//! linear-fractional minimax problem; it is solved exactly as one LP in
//! epigraph form, or by bisection on the level with an LP feasibility check.

use thiserror::Error;

use crate::lp::{LinearProgram, LpError, Relation, Sense};
use crate::mdp::{stationary_distribution, DeterministicPolicy, Mdp, MdpError, StochasticPolicy};
use crate::rewards::ComplexityMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationError {
    #[error("flow polytope is empty")]
    InfeasibleFlowPolytope,
    #[error("complexity matrix is identically zero")]
    AllZeroComplexity,
    #[error("no stationary occupancy gives mass to every required pair")]
    Unreachable,
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// A distribution over state-action pairs, stored state-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    n_states: usize,
    n_actions: usize,
    omega: Vec<f64>,
}

impl Occupancy {
    pub fn new(n_states: usize, n_actions: usize, omega: Vec<f64>) -> Result<Self, AllocationError> {
        if omega.len() != n_states * n_actions {
            return Err(AllocationError::Shape(format!(
                "occupancy has {} entries, expected {}",
                omega.len(),
                n_states * n_actions
            )));
        }
        if omega.iter().any(|&x| !(x >= 0.0)) {
            return Err(AllocationError::Shape("occupancy has negative entries".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            omega,
        })
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.omega[s * self.n_actions + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.omega
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn state_marginal(&self) -> Vec<f64> {
        self.omega.chunks(self.n_actions).map(|row| row.iter().sum()).collect()
    }

    /// `max_s |Σ_a ω(s,a) − Σ_{s',a'} P(s|s',a') ω(s',a')|`.
    pub fn flow_residual(&self, m: &Mdp) -> f64 {
        let mut inflow = vec![0.0; self.n_states];
        for sp in 0..self.n_states {
            for a in 0..self.n_actions {
                let w = self.get(sp, a);
                for (s, p) in m.row(sp, a).iter().enumerate() {
                    inflow[s] += p * w;
                }
            }
        }
        self.state_marginal()
            .iter()
            .zip(&inflow)
            .map(|(out, inn)| (out - inn).abs())
            .fold(0.0, f64::max)
    }

    /// `π(a|s) = ω(s,a) / Σ_b ω(s,b)`; rows with no mass are uniform.
    pub fn policy(&self) -> StochasticPolicy {
        let na = self.n_actions;
        let mut probs = Vec::with_capacity(self.omega.len());
        for row in self.omega.chunks(na) {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                probs.extend(row.iter().map(|x| x / total));
            } else {
                probs.extend(std::iter::repeat_n(1.0 / na as f64, na));
            }
        }
        StochasticPolicy::new(self.n_states, na, probs).expect("normalized rows")
    }

    /// Mixes two occupancies: `λ·self + (1−λ)·other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Self {
        let omega = self
            .omega
            .iter()
            .zip(&other.omega)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Self { omega, ..*self }
    }
}

/// `γ² / (2ε²(1−γ)²)`.
pub fn complexity_scale(gamma: f64, eps: f64) -> f64 {
    gamma * gamma / (2.0 * eps * eps * (1.0 - gamma) * (1.0 - gamma))
}

/// Merged per-pair coefficients `c(s,a) = max_{i: π_i(s)=a} A_i(s)·k_ε`.
pub fn pair_coefficients(
    cm: &ComplexityMatrix,
    policies: &[DeterministicPolicy],
    n_actions: usize,
    gamma: f64,
    eps: f64,
) -> Result<Vec<f64>, AllocationError> {
    if cm.n_policies() != policies.len() {
        return Err(AllocationError::Shape(format!(
            "{} complexity rows for {} policies",
            cm.n_policies(),
            policies.len()
        )));
    }
    let n = cm.n_states();
    let k = complexity_scale(gamma, eps);
    let mut c: Vec<f64> = vec![0.0; n * n_actions];
    for (i, pi) in policies.iter().enumerate() {
        if pi.n_states() != n {
            return Err(AllocationError::Shape(format!(
                "policy {i} has the wrong number of states"
            )));
        }
        for s in 0..n {
            let a = pi.action(s);
            if a >= n_actions {
                return Err(AllocationError::Shape(format!("policy {i} action out of range")));
            }
            let value = cm.get(i, s) * k;
            let slot = &mut c[s * n_actions + a];
            *slot = slot.max(value);
        }
    }
    Ok(c)
}

fn u_from_coefficients(c: &[f64], omega: &[f64]) -> f64 {
    c.iter().zip(omega).fold(0.0, |acc, (&c, &w)| {
        if c <= 0.0 {
            acc
        } else if w <= 0.0 {
            f64::INFINITY
        } else {
            acc.max(c / w)
        }
    })
}

/// `U_ε(ω)`; `+∞` when a required entry has no mass.
pub fn evaluate_u(
    omega: &Occupancy,
    cm: &ComplexityMatrix,
    policies: &[DeterministicPolicy],
    gamma: f64,
    eps: f64,
) -> Result<f64, AllocationError> {
    let c = pair_coefficients(cm, policies, omega.n_actions, gamma, eps)?;
    if c.len() != omega.omega.len() {
        return Err(AllocationError::Shape("occupancy and complexity shapes differ".into()));
    }
    Ok(u_from_coefficients(&c, &omega.omega))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// One LP: maximize `z` subject to `ω(s,a) ≥ c(s,a)·z`; then `U* = 1/z`.
    Epigraph,
    /// Bisection on the level `t` with an LP feasibility check per level.
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationConfig {
    pub tol_rel: f64,
    /// Lower bound on every entry of the returned occupancy.
    pub floor: f64,
    pub method: SolveMethod,
    /// Verify that no occupancy reaches `u·(1 − tol_rel)`.
    pub certify: bool,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self {
            tol_rel: 1e-6,
            floor: 1e-9,
            method: SolveMethod::Epigraph,
            certify: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub omega: Occupancy,
    pub u_value: f64,
    /// Simplex pivots for the epigraph LP, bisection steps otherwise.
    pub iterations: usize,
    /// Relative optimality gap proven by an infeasibility certificate, if one was computed.
    pub certified_gap: Option<f64>,
}

/// Stationary occupancy of a stochastic policy; states outside the chosen
/// closed class get zero mass.
pub fn occupancy_of_policy(m: &Mdp, policy: &StochasticPolicy) -> Result<Occupancy, AllocationError> {
    let chain = m.chain_under(policy);
    let d = stationary_distribution(&chain)?.distribution;
    let na = m.n_actions();
    let omega = (0..m.n_states() * na)
        .map(|k| d[k / na] * policy.prob(k / na, k % na))
        .collect();
    Occupancy::new(m.n_states(), na, omega)
}

pub fn uniform_occupancy(m: &Mdp) -> Result<Occupancy, AllocationError> {
    occupancy_of_policy(m, &StochasticPolicy::uniform(m.n_states(), m.n_actions()))
}

/// LP over `ω` (and optionally a trailing `z`) with flow rows, the simplex
/// row and per-entry lower bounds.
fn flow_program(m: &Mdp, objective: Vec<f64>, lower: &[f64]) -> LinearProgram {
    let n = m.n_states();
    let na = m.n_actions();
    let n_vars = objective.len();
    let mut lp = LinearProgram::new(objective, Sense::Maximize);
    // Row for the last state is implied by the others plus the simplex row.
    for s in 0..n.saturating_sub(1) {
        let mut row = vec![0.0; n_vars];
        for a in 0..na {
            row[s * na + a] += 1.0;
        }
        for sp in 0..n {
            for a in 0..na {
                row[sp * na + a] -= m.prob(sp, a, s);
            }
        }
        lp.add(row, Relation::Eq, 0.0);
    }
    let mut simplex = vec![0.0; n_vars];
    simplex[..n * na].iter_mut().for_each(|x| *x = 1.0);
    lp.add(simplex, Relation::Eq, 1.0);
    for (j, &l) in lower.iter().enumerate() {
        lp.set_bounds(j, l, None);
    }
    lp
}

/// Is there an occupancy with `U_ε(ω) ≤ level` and `ω ≥ floor`?
pub fn feasible_at_level(
    m: &Mdp,
    coeffs: &[f64],
    level: f64,
    floor: f64,
) -> Result<Option<Occupancy>, AllocationError> {
    let lower: Vec<f64> = coeffs
        .iter()
        .map(|&c| floor.max(if c > 0.0 { c / level } else { 0.0 }))
        .collect();
    if lower.iter().sum::<f64>() > 1.0 + 1e-12 {
        return Ok(None);
    }
    let lp = flow_program(m, vec![0.0; coeffs.len()], &lower);
    match lp.solve() {
        Ok(sol) => Ok(Some(clean_occupancy(m, sol.x)?)),
        Err(LpError::Infeasible) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn clean_occupancy(m: &Mdp, mut omega: Vec<f64>) -> Result<Occupancy, AllocationError> {
    omega.iter_mut().for_each(|x| *x = x.max(0.0));
    let total: f64 = omega.iter().sum();
    omega.iter_mut().for_each(|x| *x /= total);
    Occupancy::new(m.n_states(), m.n_actions(), omega)
}

/// `U*/max c` above which the optimum is treated as infinite.
pub const STARVED_RATIO: f64 = 1e7;

/// Minimizes `U_ε(ω)` over stationary occupancies of `m`.
///
/// Fails with `Unreachable` when a required pair cannot carry stationary mass.
pub fn solve_allocation(
    m: &Mdp,
    cm: &ComplexityMatrix,
    policies: &[DeterministicPolicy],
    eps: f64,
    cfg: &AllocationConfig,
) -> Result<AllocationResult, AllocationError> {
    if cm.n_states() != m.n_states() && cm.n_policies() > 0 {
        return Err(AllocationError::Shape("complexity matrix and MDP disagree on S".into()));
    }
    let gamma = m.discount();
    let coeffs = pair_coefficients(cm, policies, m.n_actions(), gamma, eps)?;
    if coeffs.iter().all(|&c| c == 0.0) {
        return Ok(AllocationResult {
            omega: uniform_occupancy(m)?,
            u_value: 0.0,
            iterations: 0,
            certified_gap: Some(0.0),
        });
    }
    let (omega, iterations, mut certified_gap) = match cfg.method {
        SolveMethod::Epigraph => solve_epigraph(m, &coeffs, cfg.floor)?,
        SolveMethod::Bisection => solve_bisection(m, &coeffs, cfg)?,
    };
    let u_value = u_from_coefficients(&coeffs, omega.values());
    // Mass at the level of the solver tolerance means some required pair is
    // transient under every policy, so the true optimum is infinite.
    let c_max = coeffs.iter().copied().fold(0.0, f64::max);
    if !(u_value <= STARVED_RATIO * c_max) {
        return Err(AllocationError::Unreachable);
    }
    if cfg.certify && u_value.is_finite() && certified_gap.is_none() {
        let below = u_value * (1.0 - cfg.tol_rel);
        if feasible_at_level(m, &coeffs, below, 0.0)?.is_none() {
            certified_gap = Some(cfg.tol_rel);
        }
    }
    Ok(AllocationResult {
        omega,
        u_value,
        iterations,
        certified_gap,
    })
}

fn solve_epigraph(m: &Mdp, coeffs: &[f64], floor: f64) -> Result<(Occupancy, usize, Option<f64>), AllocationError> {
    let n_pairs = coeffs.len();
    let c_max = coeffs.iter().copied().fold(0.0, f64::max);
    let build = |floor: f64| {
        let mut objective = vec![0.0; n_pairs + 1];
        objective[n_pairs] = 1.0;
        let mut lower = vec![floor; n_pairs];
        lower.push(0.0);
        let mut lp = flow_program(m, objective, &lower);
        for (k, &c) in coeffs.iter().enumerate() {
            if c > 0.0 {
                // Coefficients are rescaled by their maximum to keep the tableau well conditioned.
                let mut row = vec![0.0; n_pairs + 1];
                row[k] = 1.0;
                row[n_pairs] = -c / c_max;
                lp.add(row, Relation::Ge, 0.0);
            }
        }
        lp
    };
    let solution = match build(floor).solve() {
        Ok(sol) => sol,
        // Without a strictly positive stationary occupancy the floor cannot be met.
        Err(LpError::Infeasible) if floor > 0.0 => build(0.0).solve().map_err(|e| match e {
            LpError::Infeasible => AllocationError::InfeasibleFlowPolytope,
            e => e.into(),
        })?,
        Err(LpError::Infeasible) => return Err(AllocationError::InfeasibleFlowPolytope),
        Err(e) => return Err(e.into()),
    };
    let mut x = solution.x;
    x.truncate(n_pairs);
    Ok((clean_occupancy(m, x)?, solution.iterations, None))
}

fn solve_bisection(
    m: &Mdp,
    coeffs: &[f64],
    cfg: &AllocationConfig,
) -> Result<(Occupancy, usize, Option<f64>), AllocationError> {
    let mut low = coeffs.iter().copied().fold(0.0, f64::max);
    let start = uniform_occupancy(m)?;
    let mut high = u_from_coefficients(coeffs, start.values());
    let mut best = None;
    let mut steps = 0;
    if high.is_finite() {
        best = feasible_at_level(m, coeffs, high, cfg.floor)?;
    }
    // The uniform chain may leave required pairs transient; grow the level until feasible.
    if best.is_none() {
        high = low.max(f64::MIN_POSITIVE) * 2.0;
        loop {
            steps += 1;
            if let Some(omega) = feasible_at_level(m, coeffs, high, cfg.floor)? {
                best = Some(omega);
                break;
            }
            if high > 1e300 {
                return Err(AllocationError::InfeasibleFlowPolytope);
            }
            low = high;
            high *= 2.0;
        }
    }
    let mut best = best.expect("a feasible level was found");
    if let Some(omega) = feasible_at_level(m, coeffs, low, cfg.floor)? {
        return Ok((omega, steps, Some(0.0)));
    }
    while high / low > 1.0 + cfg.tol_rel {
        steps += 1;
        let mid = (low * high).sqrt();
        match feasible_at_level(m, coeffs, mid, cfg.floor)? {
            Some(omega) => {
                high = mid;
                best = omega;
            }
            None => low = mid,
        }
    }
    Ok((best, steps, Some(high / low - 1.0)))
}

/// Optimum over the whole simplex of state-action pairs, ignoring the flow
/// constraints: `ω ∝ c` with value `Σ c`.
pub fn generative_allocation(
    cm: &ComplexityMatrix,
    policies: &[DeterministicPolicy],
    n_actions: usize,
    gamma: f64,
    eps: f64,
) -> Result<AllocationResult, AllocationError> {
    let coeffs = pair_coefficients(cm, policies, n_actions, gamma, eps)?;
    let total: f64 = coeffs.iter().sum();
    if total <= 0.0 {
        return Err(AllocationError::AllZeroComplexity);
    }
    let omega = coeffs.iter().map(|c| c / total).collect();
    Ok(AllocationResult {
        omega: Occupancy::new(cm.n_states(), n_actions, omega)?,
        u_value: total,
        iterations: 0,
        certified_gap: Some(0.0),
    })
}
