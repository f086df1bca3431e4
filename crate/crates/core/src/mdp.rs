//! Tabular discounted MDPs.
//!
//! Transition tensors are stored flat in `[s][a][s']` order. Reward vectors
//! for a deterministic policy `π` are indexed by state, with entry `s` holding
//! `r(s, π(s))`; rewards over state-action pairs use [`ActionReward`].

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

/// Tolerance on transition row sums.
pub const ROW_TOL: f64 = 1e-12;

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("row (s={s}, a={a}) is not a probability distribution (sum {sum})")]
    RowNotStochastic { s: usize, a: usize, sum: f64 },
    #[error("discount factor {0} outside (0, 1)")]
    DiscountOutOfRange(f64),
    #[error("state and action spaces must be non-empty")]
    EmptySpace,
    #[error("expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("reward entry {index} = {value} outside [0, 1]")]
    RewardOutOfBox { index: usize, value: f64 },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("linear system is numerically singular")]
    SingularSystem,
    #[error("parse error: {0}")]
    Parse(String),
}

/// A finite discounted MDP `(S, A, P, γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    discount: f64,
}

impl Mdp {
    /// Builds and validates an MDP from a flat `[s][a][s']` tensor.
    pub fn new(n_states: usize, n_actions: usize, transitions: Vec<f64>, discount: f64) -> Result<Self, MdpError> {
        let m = Self::new_unchecked(n_states, n_actions, transitions, discount)?;
        m.check_rows()?;
        Ok(m)
    }

    /// Builds an MDP checking only the shape. Rows and discount are left to
    /// [`validate_mdp`].
    pub fn new_unchecked(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        discount: f64,
    ) -> Result<Self, MdpError> {
        if n_states == 0 || n_actions == 0 {
            return Err(MdpError::EmptySpace);
        }
        let expected = n_states * n_actions * n_states;
        if transitions.len() != expected {
            return Err(MdpError::ShapeMismatch {
                expected,
                got: transitions.len(),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            discount,
        })
    }

    /// Builds an MDP from a closure returning the next-state distribution of `(s, a)`.
    pub fn from_fn<F>(n_states: usize, n_actions: usize, discount: f64, mut f: F) -> Result<Self, MdpError>
    where
        F: FnMut(usize, usize) -> Vec<f64>,
    {
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = f(s, a);
                if row.len() != n_states {
                    return Err(MdpError::ShapeMismatch {
                        expected: n_states,
                        got: row.len(),
                    });
                }
                transitions.extend(row);
            }
        }
        Self::new(n_states, n_actions, transitions, discount)
    }

    fn check_rows(&self) -> Result<(), MdpError> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(MdpError::DiscountOutOfRange(self.discount));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.row(s, a);
                let sum: f64 = row.iter().sum();
                let negative = row.iter().any(|&p| !(p >= 0.0));
                if negative || (sum - 1.0).abs() > ROW_TOL {
                    return Err(MdpError::RowNotStochastic { s, a, sum });
                }
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Next-state distribution `P(·|s, a)`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a)[next]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// Same dynamics, different discount.
    pub fn with_discount(&self, discount: f64) -> Result<Self, MdpError> {
        Self::new(self.n_states, self.n_actions, self.transitions.clone(), discount)
    }

    /// Returns a copy with row `(s, a)` replaced.
    pub fn with_row(&self, s: usize, a: usize, row: &[f64]) -> Result<Self, MdpError> {
        if row.len() != self.n_states {
            return Err(MdpError::ShapeMismatch {
                expected: self.n_states,
                got: row.len(),
            });
        }
        let mut transitions = self.transitions.clone();
        let start = (s * self.n_actions + a) * self.n_states;
        transitions[start..start + self.n_states].copy_from_slice(row);
        Self::new(self.n_states, self.n_actions, transitions, self.discount)
    }

    /// State chain induced by a stochastic policy: `P_b(s'|s) = Σ_a b(a|s) P(s'|s,a)`.
    pub fn chain_under(&self, policy: &StochasticPolicy) -> DMatrix<f64> {
        let n = self.n_states;
        DMatrix::from_fn(n, n, |s, next| {
            (0..self.n_actions)
                .map(|a| policy.prob(s, a) * self.prob(s, a, next))
                .sum()
        })
    }

    /// Plain-text form: a `S A gamma` header then `S·A` rows of `S` probabilities.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {:.16e}", self.n_states, self.n_actions, self.discount);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let line: Vec<String> = self.row(s, a).iter().map(|p| format!("{p:.16e}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, MdpError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| MdpError::Parse("missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(MdpError::Parse(format!("bad header `{header}`")));
        }
        let parse_usize = |x: &str| x.parse::<usize>().map_err(|e| MdpError::Parse(format!("{x}: {e}")));
        let n_states = parse_usize(fields[0])?;
        let n_actions = parse_usize(fields[1])?;
        let discount: f64 = fields[2]
            .parse()
            .map_err(|e| MdpError::Parse(format!("{}: {e}", fields[2])))?;
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for row_index in 0..n_states * n_actions {
            let line = lines
                .next()
                .ok_or_else(|| MdpError::Parse(format!("missing row {row_index}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|e| MdpError::Parse(format!("{x}: {e}"))))
                .collect::<Result<_, _>>()?;
            if row.len() != n_states {
                return Err(MdpError::Parse(format!(
                    "row {row_index} has {} entries, expected {n_states}",
                    row.len()
                )));
            }
            transitions.extend(row);
        }
        Self::new(n_states, n_actions, transitions, discount)
    }
}

/// Structural facts reported by [`validate_mdp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationReport {
    /// The chain induced by the uniform policy is irreducible.
    pub communicating: bool,
    /// The chain induced by the uniform policy has period one.
    pub aperiodic: bool,
}

/// Checks every row and the discount, then inspects the uniform-policy chain.
///
/// A chain that is not communicating is reported in the returned
/// [`ValidationReport`], not as an error.
pub fn validate_mdp(m: &Mdp) -> Result<ValidationReport, MdpError> {
    m.check_rows()?;
    let chain = m.chain_under(&StochasticPolicy::uniform(m.n_states, m.n_actions));
    let classes = communicating_classes(&chain);
    let communicating = classes.len() == 1;
    Ok(ValidationReport {
        communicating,
        aperiodic: chain_period(&chain) == 1,
    })
}

/// A deterministic Markov policy `s ↦ π(s)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicPolicy {
    actions: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(actions: Vec<usize>, n_actions: usize) -> Result<Self, MdpError> {
        if let Some((s, &a)) = actions.iter().enumerate().find(|(_, &a)| a >= n_actions) {
            return Err(MdpError::IndexOutOfRange(format!("action {a} at state {s}")));
        }
        Ok(Self { actions })
    }

    pub fn constant(n_states: usize, action: usize) -> Self {
        Self {
            actions: vec![action; n_states],
        }
    }

    pub fn action(&self, s: usize) -> usize {
        self.actions[s]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn n_states(&self) -> usize {
        self.actions.len()
    }

    pub fn to_stochastic(&self, n_actions: usize) -> StochasticPolicy {
        let n_states = self.actions.len();
        let mut probs = vec![0.0; n_states * n_actions];
        for (s, &a) in self.actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        StochasticPolicy {
            n_states,
            n_actions,
            probs,
        }
    }
}

/// A Markov policy `π(·|s)`, stored as an `S × A` row-stochastic table.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self, MdpError> {
        if probs.len() != n_states * n_actions {
            return Err(MdpError::ShapeMismatch {
                expected: n_states * n_actions,
                got: probs.len(),
            });
        }
        for s in 0..n_states {
            let row = &probs[s * n_actions..(s + 1) * n_actions];
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > ROW_TOL {
                return Err(MdpError::RowNotStochastic { s, a: 0, sum });
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// A reward function over state-action pairs, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionReward {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl ActionReward {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self, MdpError> {
        if values.len() != n_states * n_actions {
            return Err(MdpError::ShapeMismatch {
                expected: n_states * n_actions,
                got: values.len(),
            });
        }
        check_unit_box(&values)?;
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    /// Reward equal to one at `(s, a)` and zero elsewhere.
    pub fn one_hot(n_states: usize, n_actions: usize, s: usize, a: usize) -> Self {
        let mut r = Self::zeros(n_states, n_actions);
        r.values[s * n_actions + a] = 1.0;
        r
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    /// The per-state reward vector `r(s, π(s))` seen by policy `π`.
    pub fn restrict(&self, policy: &DeterministicPolicy) -> Vec<f64> {
        (0..self.n_states).map(|s| self.get(s, policy.action(s))).collect()
    }

    fn check_shape(&self, m: &Mdp) -> Result<(), MdpError> {
        if self.n_states != m.n_states || self.n_actions != m.n_actions {
            return Err(MdpError::ShapeMismatch {
                expected: m.n_states * m.n_actions,
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_unit_box(r: &[f64]) -> Result<(), MdpError> {
    match r.iter().enumerate().find(|(_, &v)| !(0.0..=1.0).contains(&v)) {
        Some((index, &value)) => Err(MdpError::RewardOutOfBox { index, value }),
        None => Ok(()),
    }
}

fn check_policy(m: &Mdp, pi: &DeterministicPolicy) -> Result<(), MdpError> {
    if pi.n_states() != m.n_states {
        return Err(MdpError::ShapeMismatch {
            expected: m.n_states,
            got: pi.n_states(),
        });
    }
    if let Some(s) = (0..m.n_states).find(|&s| pi.action(s) >= m.n_actions) {
        return Err(MdpError::IndexOutOfRange(format!("policy action at state {s}")));
    }
    Ok(())
}

/// `P^π` and the discounted fundamental matrix `G^π = (I − γP^π)^{-1}`.
#[derive(Debug, Clone)]
pub struct PolicyMatrices {
    pub transition: DMatrix<f64>,
    pub fundamental: DMatrix<f64>,
}

/// The `S × S` transition matrix under a deterministic policy.
pub fn policy_transition(m: &Mdp, pi: &DeterministicPolicy) -> Result<DMatrix<f64>, MdpError> {
    check_policy(m, pi)?;
    let n = m.n_states;
    Ok(DMatrix::from_fn(n, n, |s, next| m.prob(s, pi.action(s), next)))
}

pub fn policy_matrices(m: &Mdp, pi: &DeterministicPolicy) -> Result<PolicyMatrices, MdpError> {
    let transition = policy_transition(m, pi)?;
    let n = m.n_states;
    let system = DMatrix::identity(n, n) - &transition * m.discount;
    let fundamental = system.lu().try_inverse().ok_or(MdpError::SingularSystem)?;
    Ok(PolicyMatrices {
        transition,
        fundamental,
    })
}

/// Solves `(I − γP^π) V = r` for an arbitrary real vector `r`.
pub(crate) fn evaluate_vector(m: &Mdp, pi: &DeterministicPolicy, r: &[f64]) -> Result<Vec<f64>, MdpError> {
    check_policy(m, pi)?;
    if r.len() != m.n_states {
        return Err(MdpError::ShapeMismatch {
            expected: m.n_states,
            got: r.len(),
        });
    }
    let n = m.n_states;
    let system = DMatrix::from_fn(n, n, |s, next| {
        let id = if s == next { 1.0 } else { 0.0 };
        id - m.discount * m.prob(s, pi.action(s), next)
    });
    let rhs = DVector::from_column_slice(r);
    let v = system.lu().solve(&rhs).ok_or(MdpError::SingularSystem)?;
    Ok(v.iter().copied().collect())
}

/// Value `V^π = G^π r` of a deterministic policy for a reward vector in `[0,1]^S`.
pub fn policy_value(m: &Mdp, pi: &DeterministicPolicy, r: &[f64]) -> Result<Vec<f64>, MdpError> {
    check_unit_box(r)?;
    evaluate_vector(m, pi, r)
}

/// `Q^π(s,a) = r(s,a) + γ Σ_{s'} P(s'|s,a) V^π(s')`, returned as an `S × A` matrix.
pub fn action_value(m: &Mdp, pi: &DeterministicPolicy, r: &ActionReward) -> Result<DMatrix<f64>, MdpError> {
    r.check_shape(m)?;
    let v = evaluate_vector(m, pi, &r.restrict(pi))?;
    Ok(q_from_values(m, r, &v))
}

fn q_from_values(m: &Mdp, r: &ActionReward, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(m.n_states, m.n_actions, |s, a| {
        let next: f64 = m.row(s, a).iter().zip(v).map(|(p, x)| p * x).sum();
        r.get(s, a) + m.discount * next
    })
}

fn greedy(q: &DMatrix<f64>) -> Vec<usize> {
    (0..q.nrows())
        .map(|s| {
            let mut best = 0;
            for a in 1..q.ncols() {
                if q[(s, a)] > q[(s, best)] + TIE_TOL {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// Value iteration until `‖V − TV‖∞ ≤ tol (1−γ)/(2γ)`.
///
/// Returns the last Bellman update `TV`, which is within `tol/2` of `V*`, and
/// the greedy policy with lowest-index tie-breaking.
pub fn value_iteration(m: &Mdp, r: &ActionReward, tol: f64) -> Result<(Vec<f64>, DeterministicPolicy), MdpError> {
    r.check_shape(m)?;
    let gamma = m.discount;
    let threshold = tol * (1.0 - gamma) / (2.0 * gamma);
    let mut v = vec![0.0; m.n_states];
    loop {
        let q = q_from_values(m, r, &v);
        let next: Vec<f64> = (0..m.n_states)
            .map(|s| (0..m.n_actions).map(|a| q[(s, a)]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if residual <= threshold {
            let policy = greedy(&q_from_values(m, r, &v));
            return Ok((v, DeterministicPolicy { actions: policy }));
        }
    }
}

/// Howard policy iteration from the all-zero policy.
///
/// An action is replaced only on a strict improvement, lowest index first.
pub fn policy_iteration(m: &Mdp, r: &ActionReward) -> Result<DeterministicPolicy, MdpError> {
    r.check_shape(m)?;
    let mut policy = DeterministicPolicy::constant(m.n_states, 0);
    // A^S bounds the number of distinct policies; saturate to avoid overflow.
    let max_iter = (m.n_actions as f64).powi(m.n_states as i32).min(1e7) as usize + 1;
    for _ in 0..max_iter {
        let q = action_value(m, &policy, r)?;
        let mut changed = false;
        let mut next = policy.actions.clone();
        for (s, slot) in next.iter_mut().enumerate() {
            let current = q[(s, *slot)];
            let best = (0..m.n_actions).fold(0, |b, a| if q[(s, a)] > q[(s, b)] + TIE_TOL { a } else { b });
            if q[(s, best)] > current + 1e-10 {
                *slot = best;
                changed = true;
            }
        }
        if !changed {
            return Ok(policy);
        }
        policy = DeterministicPolicy { actions: next };
    }
    Ok(policy)
}

/// Stationary distribution of a stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub distribution: Vec<f64>,
    /// False when the chain has more than one closed class; the returned
    /// distribution is then supported on the class holding the lowest state.
    pub unique: bool,
}

/// Strongly connected components of the support graph, each sorted.
fn support_components(chain: &DMatrix<f64>) -> (Vec<Vec<usize>>, DiGraph<(), ()>) {
    let n = chain.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if chain[(i, j)] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut components: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|x| x.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    components.sort_by_key(|c| c[0]);
    (components, graph)
}

fn communicating_classes(chain: &DMatrix<f64>) -> Vec<Vec<usize>> {
    support_components(chain).0
}

/// Closed communicating classes, ordered by their lowest state.
pub fn closed_classes(chain: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = chain.nrows();
    let (components, _) = support_components(chain);
    let mut label = vec![0; n];
    for (k, c) in components.iter().enumerate() {
        for &s in c {
            label[s] = k;
        }
    }
    components
        .iter()
        .enumerate()
        .filter(|(k, c)| {
            c.iter()
                .all(|&i| (0..n).all(|j| chain[(i, j)] <= 0.0 || label[j] == *k))
        })
        .map(|(_, c)| c.clone())
        .collect()
}

/// Period of the chain restricted to states reachable from state 0.
fn chain_period(chain: &DMatrix<f64>) -> usize {
    let n = chain.nrows();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut order = Vec::new();
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for v in 0..n {
            if chain[(u, v)] > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0usize;
    for &u in &order {
        for v in 0..n {
            if chain[(u, v)] > 0.0 {
                let diff = (level[u] + 1).abs_diff(level[v]);
                g = gcd(g, diff);
            }
        }
    }
    g.max(1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Solves `d P = d`, `Σ d = 1` on one closed class; states outside get zero mass.
pub fn stationary_distribution(chain: &DMatrix<f64>) -> Result<Stationary, MdpError> {
    let n = chain.nrows();
    if n == 0 || chain.ncols() != n {
        return Err(MdpError::ShapeMismatch {
            expected: n * n,
            got: chain.len(),
        });
    }
    for i in 0..n {
        let sum: f64 = chain.row(i).iter().sum();
        if chain.row(i).iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(MdpError::RowNotStochastic { s: i, a: 0, sum });
        }
    }
    let classes = closed_classes(chain);
    let class = &classes[0];
    let k = class.len();
    // Transposed system (I − P_CC)ᵀ d = 0 with the last equation replaced by Σ d = 1.
    let mut system = DMatrix::from_fn(k, k, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - chain[(class[j], class[i])]
    });
    let mut rhs = DVector::zeros(k);
    for j in 0..k {
        system[(k - 1, j)] = 1.0;
    }
    rhs[k - 1] = 1.0;
    let solution = system.lu().solve(&rhs).ok_or(MdpError::SingularSystem)?;
    let mut distribution = vec![0.0; n];
    for (idx, &s) in class.iter().enumerate() {
        distribution[s] = solution[idx].max(0.0);
    }
    let total: f64 = distribution.iter().sum();
    distribution.iter_mut().for_each(|x| *x /= total);
    Ok(Stationary {
        distribution,
        unique: classes.len() == 1,
    })
}

/// Transition counts and the derived maximum-likelihood model.
///
/// Rows of unvisited pairs are estimated as uniform over next states.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    n_states: usize,
    n_actions: usize,
    discount: f64,
    counts: Vec<u64>,
    visits: Vec<u64>,
    state_visits: Vec<u64>,
    total: u64,
}

impl EmpiricalModel {
    pub fn new(n_states: usize, n_actions: usize, discount: f64) -> Self {
        Self {
            n_states,
            n_actions,
            discount,
            counts: vec![0; n_states * n_actions * n_states],
            visits: vec![0; n_states * n_actions],
            state_visits: vec![0; n_states],
            total: 0,
        }
    }

    pub fn for_mdp(m: &Mdp) -> Self {
        Self::new(m.n_states, m.n_actions, m.discount)
    }

    pub fn update(&mut self, s: usize, a: usize, next: usize) -> Result<(), MdpError> {
        if s >= self.n_states || next >= self.n_states || a >= self.n_actions {
            return Err(MdpError::IndexOutOfRange(format!("transition ({s}, {a}, {next})")));
        }
        self.counts[(s * self.n_actions + a) * self.n_states + next] += 1;
        self.visits[s * self.n_actions + a] += 1;
        self.state_visits[s] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn count(&self, s: usize, a: usize, next: usize) -> u64 {
        self.counts[(s * self.n_actions + a) * self.n_states + next]
    }

    /// `N(s, a)`.
    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.n_actions + a]
    }

    /// All `N(s, a)` in state-major order.
    pub fn visit_counts(&self) -> &[u64] {
        &self.visits
    }

    /// `N(s) = Σ_a N(s, a)`.
    pub fn state_visits(&self, s: usize) -> u64 {
        self.state_visits[s]
    }

    /// Number of recorded transitions.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn estimate_row(&self, s: usize, a: usize) -> Vec<f64> {
        let n = self.visits(s, a);
        if n == 0 {
            return vec![1.0 / self.n_states as f64; self.n_states];
        }
        let start = (s * self.n_actions + a) * self.n_states;
        self.counts[start..start + self.n_states]
            .iter()
            .map(|&c| c as f64 / n as f64)
            .collect()
    }

    /// The current estimate `M_t`.
    pub fn estimate(&self) -> Mdp {
        let mut transitions = Vec::with_capacity(self.counts.len());
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                transitions.extend(self.estimate_row(s, a));
            }
        }
        Mdp {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transitions,
            discount: self.discount,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn self_loop() -> Mdp {
        Mdp::new(1, 1, vec![1.0], 0.9).unwrap()
    }

    fn cycle(gamma: f64) -> Mdp {
        Mdp::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], gamma).unwrap()
    }

    fn random_mdp(rng: &mut ChaCha8Rng, s: usize, a: usize, gamma: f64) -> Mdp {
        Mdp::from_fn(s, a, gamma, |_, _| {
            let w: Vec<f64> = (0..s).map(|_| rng.random::<f64>() + 0.01).collect();
            let t: f64 = w.iter().sum();
            w.into_iter().map(|x| x / t).collect()
        })
        .unwrap()
    }

    #[test]
    fn validate_degenerate_self_loop() {
        let report = validate_mdp(&self_loop()).unwrap();
        assert!(report.communicating && report.aperiodic);
    }

    #[test]
    fn validate_rejects_substochastic_row() {
        let m = Mdp::new_unchecked(2, 1, vec![0.5, 0.4, 0.0, 1.0], 0.9).unwrap();
        assert!(matches!(
            validate_mdp(&m),
            Err(MdpError::RowNotStochastic { s: 0, a: 0, .. })
        ));
        assert!(Mdp::new(2, 1, vec![0.5, 0.4, 0.0, 1.0], 0.9).is_err());
    }

    #[test]
    fn validate_rejects_bad_discount() {
        let m = Mdp::new_unchecked(1, 1, vec![1.0], 1.0).unwrap();
        assert_eq!(validate_mdp(&m), Err(MdpError::DiscountOutOfRange(1.0)));
    }

    #[test]
    fn validate_reports_periodic_and_disconnected_chains() {
        let report = validate_mdp(&cycle(0.5)).unwrap();
        assert!(report.communicating);
        assert!(!report.aperiodic);
        let split = Mdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], 0.5).unwrap();
        assert!(!validate_mdp(&split).unwrap().communicating);
    }

    #[test]
    fn matrices_scalar_series() {
        let pm = policy_matrices(&self_loop(), &DeterministicPolicy::constant(1, 0)).unwrap();
        assert_abs_diff_eq!(pm.transition[(0, 0)], 1.0);
        assert_abs_diff_eq!(pm.fundamental[(0, 0)], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn matrices_two_state_cycle() {
        let pm = policy_matrices(&cycle(0.5), &DeterministicPolicy::constant(2, 0)).unwrap();
        let c = 1.0 / 0.75;
        let expected = [[c, 0.5 * c], [0.5 * c, c]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(pm.fundamental[(i, j)], expected[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn fundamental_matrix_fixed_point_and_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_mdp(&mut rng, 4, 3, 0.9);
            let pi = DeterministicPolicy::new((0..4).map(|_| rng.random_range(0..3)).collect(), 3).unwrap();
            let pm = policy_matrices(&m, &pi).unwrap();
            let id = DMatrix::<f64>::identity(4, 4);
            let fixed = &id + &pm.transition * &pm.fundamental * 0.9;
            assert!((&pm.fundamental - fixed).amax() < 1e-9);
            // Truncated Neumann series with K = 200.
            let mut term = id.clone();
            let mut series = id.clone();
            for _ in 0..200 {
                term = &term * &pm.transition * 0.9;
                series += &term;
            }
            let bound = 0.9f64.powi(201) / 0.1;
            assert!((&pm.fundamental - series).amax() <= bound + 1e-12);
        }
    }

    #[test]
    fn value_of_constant_reward() {
        let v = policy_value(&self_loop(), &DeterministicPolicy::constant(1, 0), &[0.5]).unwrap();
        assert_abs_diff_eq!(v[0], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn value_of_cycle() {
        let v = policy_value(&cycle(0.5), &DeterministicPolicy::constant(2, 0), &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v[0], 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn value_rejects_reward_outside_box() {
        let err = policy_value(&cycle(0.5), &DeterministicPolicy::constant(2, 0), &[1.5, 0.0]);
        assert!(matches!(err, Err(MdpError::RewardOutOfBox { index: 0, .. })));
    }

    #[test]
    fn bellman_residual_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let s = rng.random_range(1..7);
            let a = rng.random_range(1..4);
            let gamma = rng.random_range(0.1..0.99);
            let m = random_mdp(&mut rng, s, a, gamma);
            let pi = DeterministicPolicy::new((0..s).map(|_| rng.random_range(0..a)).collect(), a).unwrap();
            let r: Vec<f64> = (0..s).map(|_| rng.random::<f64>()).collect();
            let v = policy_value(&m, &pi, &r).unwrap();
            for x in 0..s {
                let next: f64 = m.row(x, pi.action(x)).iter().zip(&v).map(|(p, y)| p * y).sum();
                assert!((v[x] - r[x] - gamma * next).abs() <= 1e-9);
                assert!(v[x] >= -1e-12 && v[x] <= 1.0 / (1.0 - gamma) + 1e-9);
            }
        }
    }

    #[test]
    fn action_values_match_policy_value() {
        let r = ActionReward::new(1, 1, vec![0.5]).unwrap();
        let q = action_value(&self_loop(), &DeterministicPolicy::constant(1, 0), &r).unwrap();
        assert_abs_diff_eq!(q[(0, 0)], 5.0, epsilon = 1e-12);

        let m = Mdp::new(2, 2, vec![0.0, 1.0, 0.3, 0.7, 1.0, 0.0, 0.5, 0.5], 0.5).unwrap();
        let pi = DeterministicPolicy::new(vec![0, 1], 2).unwrap();
        let r = ActionReward::new(2, 2, vec![1.0, 0.2, 0.0, 0.4]).unwrap();
        let q = action_value(&m, &pi, &r).unwrap();
        let v = policy_value(&m, &pi, &r.restrict(&pi)).unwrap();
        for s in 0..2 {
            assert_abs_diff_eq!(q[(s, pi.action(s))], v[s], epsilon = 1e-9);
        }
    }

    #[test]
    fn value_iteration_zero_reward() {
        let m = cycle(0.5);
        let (v, _) = value_iteration(&m, &ActionReward::zeros(2, 1), 1e-8).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn value_iteration_matches_greedy_policy_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = random_mdp(&mut rng, 2, 2, 0.8);
            let r = ActionReward::one_hot(2, 2, rng.random_range(0..2), rng.random_range(0..2));
            let tol = 1e-8;
            let (v, pi) = value_iteration(&m, &r, tol).unwrap();
            let vpi = policy_value(&m, &pi, &r.restrict(&pi)).unwrap();
            for s in 0..2 {
                assert!((v[s] - vpi[s]).abs() <= tol);
            }
            let q = action_value(&m, &pi, &r).unwrap();
            for s in 0..2 {
                let max = (0..2).map(|a| q[(s, a)]).fold(f64::NEG_INFINITY, f64::max);
                assert!((max - vpi[s]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn policy_iteration_zero_reward_keeps_first_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_mdp(&mut rng, 3, 3, 0.9);
        let pi = policy_iteration(&m, &ActionReward::zeros(3, 3)).unwrap();
        assert_eq!(pi.actions(), &[0, 0, 0]);
    }

    #[test]
    fn policy_iteration_agrees_with_value_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let m = random_mdp(&mut rng, 4, 3, 0.9);
            let r = ActionReward::new(4, 3, (0..12).map(|_| rng.random::<f64>()).collect()).unwrap();
            let pi = policy_iteration(&m, &r).unwrap();
            let v_pi = policy_value(&m, &pi, &r.restrict(&pi)).unwrap();
            let (v_star, _) = value_iteration(&m, &r, 1e-9).unwrap();
            for s in 0..4 {
                assert!((v_pi[s] - v_star[s]).abs() <= 1e-6);
            }
            let q = action_value(&m, &pi, &r).unwrap();
            for s in 0..4 {
                for a in 0..3 {
                    assert!(q[(s, a)] <= q[(s, pi.action(s))] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn stationary_flip_chain() {
        let chain = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let st = stationary_distribution(&chain).unwrap();
        assert!(st.unique);
        assert_abs_diff_eq!(st.distribution[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(st.distribution[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn stationary_identity_is_not_unique() {
        let st = stationary_distribution(&DMatrix::identity(2, 2)).unwrap();
        assert!(!st.unique);
        assert_abs_diff_eq!(st.distribution.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn stationary_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chain = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>() + 0.05);
        let sums: Vec<f64> = (0..5).map(|i| chain.row(i).sum()).collect();
        let chain = DMatrix::from_fn(5, 5, |i, j| chain[(i, j)] / sums[i]);
        let st = stationary_distribution(&chain).unwrap();
        let mut power = chain.clone();
        for _ in 0..10 {
            power = &power * &power; // chain^1024
        }
        for j in 0..5 {
            assert!((st.distribution[j] - power[(0, j)]).abs() < 1e-8);
        }
        let d = DVector::from_column_slice(&st.distribution);
        assert!((chain.transpose() * &d - &d).amax() < 1e-10);
    }

    #[test]
    fn stationary_ignores_transient_states() {
        // State 0 leaks into the closed class {1, 2}.
        let chain = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.0, 0.2, 0.8, 0.0, 0.6, 0.4]);
        let st = stationary_distribution(&chain).unwrap();
        assert!(st.unique);
        assert_eq!(st.distribution[0], 0.0);
    }

    #[test]
    fn empirical_single_transition() {
        let mut em = EmpiricalModel::new(2, 1, 0.9);
        em.update(0, 0, 1).unwrap();
        assert_eq!(em.estimate_row(0, 0), vec![0.0, 1.0]);
        assert_eq!(em.estimate_row(1, 0), vec![0.5, 0.5]);
        assert_eq!(em.visits(0, 0), 1);
        assert_eq!(em.state_visits(0), 1);
        assert!(validate_mdp(&em.estimate()).is_ok());
    }

    #[test]
    fn empirical_rejects_out_of_range() {
        let mut em = EmpiricalModel::new(2, 1, 0.9);
        assert!(matches!(em.update(0, 1, 0), Err(MdpError::IndexOutOfRange(_))));
        assert!(matches!(em.update(2, 0, 0), Err(MdpError::IndexOutOfRange(_))));
    }

    #[test]
    fn empirical_concentrates() {
        // Binomial(10000, 0.3): sd ≈ 0.0046, so 0.02 is beyond four standard deviations.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut em = EmpiricalModel::new(2, 1, 0.9);
        for _ in 0..10_000 {
            let next = usize::from(rng.random::<f64>() >= 0.3);
            em.update(0, 0, next).unwrap();
        }
        let row = em.estimate_row(0, 0);
        assert!((row[0] - 0.3).abs() < 0.02);
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_mdp(&mut rng, 3, 2, 0.95);
        let back = Mdp::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(m.to_text().starts_with("3 2 "));
    }

    #[test]
    fn text_rejects_short_rows() {
        assert!(matches!(Mdp::from_text("2 1 0.9\n1 0\n"), Err(MdpError::Parse(_))));
    }
}
