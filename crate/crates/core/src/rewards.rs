//! Reward sets and the complexity coefficients derived from them.
//!
//! Rewards follow the per-policy vector convention: a reward for policy `π`
//! is a vector in `[0,1]^S` whose entry `s` is `r(s, π(s))`.

use rand::Rng;
use thiserror::Error;

use crate::deviation::{gamma_operator, GammaOperator};
use crate::lp::{LinearProgram, LpError, Relation, Sense};
use crate::mdp::{check_unit_box, DeterministicPolicy, Mdp, MdpError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("finite reward set is empty")]
    EmptyFinite,
    #[error("reward vector has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("polytope {{r in [0,1]^S : Ar <= b}} is empty")]
    InfeasiblePolytope,
    #[error("cannot draw {k} distinct basis vectors in dimension {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("expected one reward set per policy ({policies} policies, {sets} sets)")]
    SetCount { policies: usize, sets: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// `{r ∈ [0,1]^S : A r ≤ b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Polytope {
    /// Builds the polytope and checks it is non-empty.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self, RewardError> {
        if a.len() != b.len() {
            return Err(RewardError::Length {
                expected: a.len(),
                got: b.len(),
            });
        }
        let dim = a.first().map_or(0, Vec::len);
        if let Some(row) = a.iter().find(|row| row.len() != dim) {
            return Err(RewardError::Length {
                expected: dim,
                got: row.len(),
            });
        }
        let p = Self { a, b };
        if dim > 0 {
            match p.program(&vec![0.0; dim], Sense::Maximize).solve() {
                Ok(_) => {}
                Err(LpError::Infeasible) => return Err(RewardError::InfeasiblePolytope),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(p)
    }

    /// The unit box written as `r ≤ 1`, `−r ≤ 0`.
    pub fn unit_box(n: usize) -> Self {
        let mut a = Vec::with_capacity(2 * n);
        let mut b = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut up = vec![0.0; n];
            up[i] = 1.0;
            a.push(up);
            b.push(1.0);
            let mut down = vec![0.0; n];
            down[i] = -1.0;
            a.push(down);
            b.push(0.0);
        }
        Self { a, b }
    }

    pub fn n_rows(&self) -> usize {
        self.a.len()
    }

    /// Dimension `S`, or `None` for a polytope with no rows.
    pub fn dim(&self) -> Option<usize> {
        self.a.first().map(Vec::len)
    }

    pub fn contains(&self, r: &[f64], tol: f64) -> bool {
        r.iter().all(|&x| (-tol..=1.0 + tol).contains(&x))
            && self
                .a
                .iter()
                .zip(&self.b)
                .all(|(row, &b)| row.iter().zip(r).map(|(a, x)| a * x).sum::<f64>() <= b + tol)
    }

    fn program(&self, objective: &[f64], sense: Sense) -> LinearProgram {
        let n = objective.len();
        let mut lp = LinearProgram::new(objective.to_vec(), sense);
        for (row, &b) in self.a.iter().zip(&self.b) {
            lp.add(row.clone(), Relation::Le, b);
        }
        for j in 0..n {
            lp.set_bounds(j, 0.0, Some(1.0));
        }
        lp
    }

    /// `max c·r` over the polytope intersected with the unit box.
    pub fn maximize(&self, c: &[f64]) -> Result<f64, RewardError> {
        if let Some(d) = self.dim() {
            if d != c.len() {
                return Err(RewardError::Length {
                    expected: d,
                    got: c.len(),
                });
            }
        }
        match self.program(c, Sense::Maximize).solve() {
            Ok(sol) => Ok(sol.objective),
            Err(LpError::Infeasible) => Err(RewardError::InfeasiblePolytope),
            Err(e) => Err(e.into()),
        }
    }

    /// Plain-text form: a `m S` header then `m` rows holding a row of `A` and its `b` entry.
    pub fn to_text(&self) -> String {
        let dim = self.dim().unwrap_or(0);
        let mut out = format!("{} {}\n", self.a.len(), dim);
        for (row, b) in self.a.iter().zip(&self.b) {
            let mut fields: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            fields.push(format!("{b:.16e}"));
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, RewardError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| RewardError::Parse("missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|x| x.parse().map_err(|e| RewardError::Parse(format!("{x}: {e}"))))
            .collect::<Result<_, _>>()?;
        let [m, s] = dims[..] else {
            return Err(RewardError::Parse(format!("bad header `{header}`")));
        };
        let mut a = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        for k in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| RewardError::Parse(format!("missing row {k}")))?;
            let mut row: Vec<f64> = line
                .split_whitespace()
                .map(|x| x.parse().map_err(|e| RewardError::Parse(format!("{x}: {e}"))))
                .collect::<Result<_, _>>()?;
            if row.len() != s + 1 {
                return Err(RewardError::Parse(format!(
                    "row {k} has {} entries, expected {}",
                    row.len(),
                    s + 1
                )));
            }
            b.push(row.pop().expect("row is non-empty"));
            a.push(row);
        }
        Self::new(a, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardSet {
    Finite(Vec<Vec<f64>>),
    /// The whole box `[0,1]^S` (reward-free evaluation).
    Box01,
    Polytope(Polytope),
}

impl RewardSet {
    pub fn finite(rewards: Vec<Vec<f64>>) -> Result<Self, RewardError> {
        let Some(first) = rewards.first() else {
            return Err(RewardError::EmptyFinite);
        };
        let n = first.len();
        for r in &rewards {
            if r.len() != n {
                return Err(RewardError::Length {
                    expected: n,
                    got: r.len(),
                });
            }
            check_unit_box(r)?;
        }
        Ok(Self::Finite(rewards))
    }

    fn check_dim(&self, n: usize) -> Result<(), RewardError> {
        let dim = match self {
            Self::Finite(rs) => rs.first().map(Vec::len),
            Self::Box01 => None,
            Self::Polytope(p) => p.dim(),
        };
        match dim {
            Some(d) if d != n => Err(RewardError::Length { expected: n, got: d }),
            _ => Ok(()),
        }
    }
}

/// `{e_1, …, e_S}`.
pub fn canonical_basis(n_states: usize) -> RewardSet {
    RewardSet::Finite((0..n_states).map(|i| one_hot(n_states, i)).collect())
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// `k` distinct canonical vectors drawn uniformly without replacement.
pub fn sample_finite_rewards<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    k: usize,
) -> Result<RewardSet, RewardError> {
    if k > n_states || k == 0 {
        return Err(RewardError::KTooLarge { k, n: n_states });
    }
    let picks = rand::seq::index::sample(rng, n_states, k);
    Ok(RewardSet::Finite(
        picks.into_iter().map(|i| one_hot(n_states, i)).collect(),
    ))
}

/// `sup_{r ∈ set} |ρ_r(s, s')|` using a precomputed `Γ` for the policy.
pub fn sup_abs_rho_with(op: &GammaOperator, s: usize, s_prime: usize, set: &RewardSet) -> Result<f64, RewardError> {
    let n = op.n_states();
    set.check_dim(n)?;
    match set {
        RewardSet::Finite(rs) => Ok(rs.iter().map(|r| op.rho(s, s_prime, r).abs()).fold(0.0, f64::max)),
        RewardSet::Box01 => {
            let (plus, minus) = op.signed_sums(s, s_prime);
            Ok(plus.max(minus))
        }
        RewardSet::Polytope(p) => {
            let row: Vec<f64> = op.anchor(s).row(s_prime).iter().copied().collect();
            let neg: Vec<f64> = row.iter().map(|x| -x).collect();
            let up = p.maximize(&row)?;
            let down = p.maximize(&neg)?;
            Ok(up.max(down).max(0.0))
        }
    }
}

pub fn sup_abs_rho(
    m: &Mdp,
    pi: &DeterministicPolicy,
    s: usize,
    s_prime: usize,
    set: &RewardSet,
) -> Result<f64, RewardError> {
    let op = gamma_operator(m, pi)?;
    sup_abs_rho_with(&op, s, s_prime, set)
}

/// Coefficients `A_i(s)`, one row per policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityMatrix {
    entries: Vec<Vec<f64>>,
}

impl ComplexityMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Self {
        Self { entries }
    }

    pub fn get(&self, policy: usize, s: usize) -> f64 {
        self.entries[policy][s]
    }

    pub fn row(&self, policy: usize) -> &[f64] {
        &self.entries[policy]
    }

    pub fn n_policies(&self) -> usize {
        self.entries.len()
    }

    pub fn n_states(&self) -> usize {
        self.entries.first().map_or(0, Vec::len)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(|&x| x == 0.0)
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// `A_i(s) = max_{s'} sup_{r ∈ R_i} |ρ(s, s')|`, squared when `use_square` is set.
pub fn complexity_matrix(
    m: &Mdp,
    policies: &[DeterministicPolicy],
    sets: &[RewardSet],
    use_square: bool,
) -> Result<ComplexityMatrix, RewardError> {
    if policies.len() != sets.len() {
        return Err(RewardError::SetCount {
            policies: policies.len(),
            sets: sets.len(),
        });
    }
    let n = m.n_states();
    let mut entries = Vec::with_capacity(policies.len());
    for (pi, set) in policies.iter().zip(sets) {
        let op = gamma_operator(m, pi)?;
        let mut row = vec![0.0; n];
        for (s, slot) in row.iter_mut().enumerate() {
            let mut best: f64 = 0.0;
            for s_prime in 0..n {
                best = best.max(sup_abs_rho_with(&op, s, s_prime, set)?);
            }
            *slot = if use_square { best * best } else { best };
        }
        entries.push(row);
    }
    Ok(ComplexityMatrix { entries })
}
