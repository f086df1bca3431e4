//! Benchmark environments.
//!
//! State 0 is always the start state. In the two-branch environments the
//! states are `s0 = 0`, `s_i = i` and `s'_i = n + i` for `i = 1..=n`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::mdp::{Mdp, MdpError};

pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_P: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("invalid environment parameters: {0}")]
    InvalidParams(String),
    #[error("unknown environment `{0}`")]
    UnknownKind(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// `p' = 6(1 − p)/7`.
pub fn default_p_prime(p: f64) -> f64 {
    6.0 * (1.0 - p) / 7.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvSpec {
    Riverswim { n: usize, p: f64, p_prime: f64 },
    ForkedRiverswim { n: usize, p: f64, p_prime: f64 },
    DoubleChain { n: usize, p: f64 },
    NArms { n: usize, p0: f64 },
}

impl EnvSpec {
    pub fn riverswim(n: usize) -> Self {
        Self::Riverswim {
            n,
            p: DEFAULT_P,
            p_prime: default_p_prime(DEFAULT_P),
        }
    }

    pub fn forked_riverswim(n: usize) -> Self {
        Self::ForkedRiverswim {
            n,
            p: DEFAULT_P,
            p_prime: default_p_prime(DEFAULT_P),
        }
    }

    pub fn double_chain(n: usize) -> Self {
        Self::DoubleChain { n, p: DEFAULT_P }
    }

    pub fn narms(n: usize) -> Self {
        Self::NArms { n, p0: DEFAULT_P }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Riverswim { .. } => "riverswim",
            Self::ForkedRiverswim { .. } => "forked_riverswim",
            Self::DoubleChain { .. } => "double_chain",
            Self::NArms { .. } => "narms",
        }
    }

    pub fn size(&self) -> usize {
        match *self {
            Self::Riverswim { n, .. }
            | Self::ForkedRiverswim { n, .. }
            | Self::DoubleChain { n, .. }
            | Self::NArms { n, .. } => n,
        }
    }

    /// Same environment with a different size parameter.
    pub fn with_size(self, n: usize) -> Self {
        match self {
            Self::Riverswim { p, p_prime, .. } => Self::Riverswim { n, p, p_prime },
            Self::ForkedRiverswim { p, p_prime, .. } => Self::ForkedRiverswim { n, p, p_prime },
            Self::DoubleChain { p, .. } => Self::DoubleChain { n, p },
            Self::NArms { p0, .. } => Self::NArms { n, p0 },
        }
    }

    /// Same environment with a different main probability; `p'` follows `p` when it was at its default.
    pub fn with_p(self, new_p: f64) -> Self {
        let follow = |p: f64, p_prime: f64| {
            if (p_prime - default_p_prime(p)).abs() < 1e-15 {
                default_p_prime(new_p)
            } else {
                p_prime
            }
        };
        match self {
            Self::Riverswim { n, p, p_prime } => Self::Riverswim {
                n,
                p: new_p,
                p_prime: follow(p, p_prime),
            },
            Self::ForkedRiverswim { n, p, p_prime } => Self::ForkedRiverswim {
                n,
                p: new_p,
                p_prime: follow(p, p_prime),
            },
            Self::DoubleChain { n, .. } => Self::DoubleChain { n, p: new_p },
            Self::NArms { n, .. } => Self::NArms { n, p0: new_p },
        }
    }

    pub fn build(&self, gamma: f64) -> Result<Mdp, EnvError> {
        match *self {
            Self::Riverswim { n, p, p_prime } => make_riverswim(n, p, p_prime, gamma),
            Self::ForkedRiverswim { n, p, p_prime } => make_forked_riverswim(n, p, p_prime, gamma),
            Self::DoubleChain { n, p } => make_double_chain(n, p, gamma),
            Self::NArms { n, p0 } => make_narms(n, p0, gamma),
        }
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Riverswim { n, p, p_prime } | Self::ForkedRiverswim { n, p, p_prime } => {
                write!(f, "{} n={n} p={p} p_prime={p_prime}", self.kind())
            }
            Self::DoubleChain { n, p } => write!(f, "{} n={n} p={p}", self.kind()),
            Self::NArms { n, p0 } => write!(f, "{} n={n} p0={p0}", self.kind()),
        }
    }
}

/// Parses `kind key=value ...`, e.g. `riverswim n=5 p=0.7`.
impl FromStr for EnvSpec {
    type Err = EnvError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut tokens = text.split_whitespace();
        let kind = tokens.next().ok_or_else(|| EnvError::UnknownKind(String::new()))?;
        let mut n = None;
        let mut p = None;
        let mut p_prime = None;
        for token in tokens {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| EnvError::InvalidParams(format!("expected key=value, got `{token}`")))?;
            let bad = |e: &dyn fmt::Display| EnvError::InvalidParams(format!("{key}: {e}"));
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "p" | "p0" => p = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                "p_prime" => p_prime = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                _ => return Err(EnvError::InvalidParams(format!("unknown key `{key}`"))),
            }
        }
        let p = p.unwrap_or(DEFAULT_P);
        let normalized = kind.to_ascii_lowercase().replace('-', "_");
        let spec = match normalized.as_str() {
            "riverswim" => Self::Riverswim {
                n: n.unwrap_or(5),
                p,
                p_prime: p_prime.unwrap_or_else(|| default_p_prime(p)),
            },
            "forked_riverswim" | "forkedriverswim" => Self::ForkedRiverswim {
                n: n.unwrap_or(5),
                p,
                p_prime: p_prime.unwrap_or_else(|| default_p_prime(p)),
            },
            "double_chain" | "doublechain" => Self::DoubleChain { n: n.unwrap_or(5), p },
            "narms" | "n_arms" => Self::NArms {
                n: n.unwrap_or(6),
                p0: p,
            },
            _ => return Err(EnvError::UnknownKind(kind.to_string())),
        };
        if p_prime.is_some() && matches!(spec, Self::DoubleChain { .. } | Self::NArms { .. }) {
            return Err(EnvError::InvalidParams(format!("{} has no p_prime", spec.kind())));
        }
        Ok(spec)
    }
}

fn check_prob(name: &str, p: f64) -> Result<(), EnvError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(EnvError::InvalidParams(format!("{name} = {p} outside (0, 1)")))
    }
}

fn check_pair(p: f64, p_prime: f64) -> Result<(), EnvError> {
    check_prob("p", p)?;
    check_prob("p_prime", p_prime)?;
    if p + p_prime >= 1.0 {
        return Err(EnvError::InvalidParams(format!(
            "p + p_prime = {} must be below 1",
            p + p_prime
        )));
    }
    Ok(())
}

/// Dense builder for `[s][a][s']` tensors.
struct Tensor {
    n: usize,
    na: usize,
    data: Vec<f64>,
}

impl Tensor {
    fn new(n: usize, na: usize) -> Self {
        Self {
            n,
            na,
            data: vec![0.0; n * na * n],
        }
    }

    fn add(&mut self, s: usize, a: usize, next: usize, p: f64) {
        self.data[(s * self.na + a) * self.n + next] += p;
    }

    fn finish(self, gamma: f64) -> Result<Mdp, EnvError> {
        Ok(Mdp::new(self.n, self.na, self.data, gamma)?)
    }
}

/// Swim-right dynamics along a chain `chain[0..]`, where `chain[0]` is the
/// entry state; returns nothing, writes action `a` rows for `chain[1..]`.
fn swim_right(t: &mut Tensor, chain: &[usize], a: usize, p: f64, p_prime: f64) {
    let last = chain.len() - 1;
    for k in 1..=last {
        let s = chain[k];
        if k == last {
            t.add(s, a, s, p);
            t.add(s, a, chain[k - 1], 1.0 - p);
        } else {
            t.add(s, a, chain[k + 1], p);
            t.add(s, a, s, p_prime);
            t.add(s, a, chain[k - 1], 1.0 - p - p_prime);
        }
    }
}

pub fn make_riverswim(n: usize, p: f64, p_prime: f64, gamma: f64) -> Result<Mdp, EnvError> {
    check_pair(p, p_prime)?;
    if n < 2 {
        return Err(EnvError::InvalidParams("riverswim needs n >= 2".into()));
    }
    let mut t = Tensor::new(n, 2);
    t.add(0, 0, 0, 1.0);
    for s in 1..n {
        t.add(s, 0, s - 1, 1.0);
    }
    t.add(0, 1, 1, p);
    t.add(0, 1, 0, 1.0 - p);
    let chain: Vec<usize> = (0..n).collect();
    swim_right(&mut t, &chain, 1, p, p_prime);
    t.finish(gamma)
}

pub fn make_forked_riverswim(n: usize, p: f64, p_prime: f64, gamma: f64) -> Result<Mdp, EnvError> {
    check_pair(p, p_prime)?;
    if n < 1 {
        return Err(EnvError::InvalidParams("forked riverswim needs n >= 1".into()));
    }
    let size = 2 * n + 1;
    let mut t = Tensor::new(size, 3);
    t.add(0, 0, 0, 1.0);
    t.add(0, 1, 1, p);
    t.add(0, 1, 0, 1.0 - p);
    t.add(0, 2, 0, 1.0);
    for offset in [0, n] {
        let chain: Vec<usize> = std::iter::once(0).chain((1..=n).map(|i| offset + i)).collect();
        for k in 1..=n {
            let s = chain[k];
            t.add(s, 0, chain[k - 1], 1.0);
            let twin = if offset == 0 { n + k } else { k };
            if k == n {
                t.add(s, 2, s, 1.0);
            } else {
                t.add(s, 2, twin, 1.0);
            }
        }
        swim_right(&mut t, &chain, 1, p, p_prime);
    }
    t.finish(gamma)
}

pub fn make_double_chain(n: usize, p: f64, gamma: f64) -> Result<Mdp, EnvError> {
    check_prob("p", p)?;
    if n < 1 {
        return Err(EnvError::InvalidParams("double chain needs n >= 1".into()));
    }
    let size = 2 * n + 1;
    let mut t = Tensor::new(size, 2);
    t.add(0, 0, 1, 1.0);
    t.add(0, 1, n + 1, 1.0);
    for offset in [0, n] {
        let chain: Vec<usize> = std::iter::once(0).chain((1..=n).map(|i| offset + i)).collect();
        for k in 1..=n {
            let s = chain[k];
            t.add(s, 0, chain[k - 1], 1.0);
            if k == n {
                t.add(s, 1, s, p);
            } else {
                t.add(s, 1, chain[k + 1], p);
            }
            t.add(s, 1, chain[k - 1], 1.0 - p);
        }
    }
    t.finish(gamma)
}

/// In arm state `s_i`, action `a_j` returns home iff `j ≥ min(i, n − 1)`;
/// every other action self-loops.
pub fn make_narms(n: usize, p0: f64, gamma: f64) -> Result<Mdp, EnvError> {
    check_prob("p0", p0)?;
    if n < 2 {
        return Err(EnvError::InvalidParams("narms needs n >= 2".into()));
    }
    let size = n + 1;
    let mut t = Tensor::new(size, n);
    t.add(0, 0, 1, 1.0);
    for a in 1..n {
        let go = p0 / (a as f64 + 1.0);
        t.add(0, a, a + 1, go);
        t.add(0, a, 0, 1.0 - go);
    }
    for i in 1..=n {
        for j in 0..n {
            if j >= i.min(n - 1) {
                t.add(i, j, 0, 1.0);
            } else {
                t.add(i, j, i, 1.0);
            }
        }
    }
    t.finish(gamma)
}

/// The `(state, action)` whose one-hot reward defines the environment's default target policy.
pub fn default_target(spec: &EnvSpec) -> (usize, usize) {
    match *spec {
        EnvSpec::Riverswim { n, .. } => (n - 1, 1),
        EnvSpec::ForkedRiverswim { n, .. } | EnvSpec::DoubleChain { n, .. } => (2 * n, 1),
        EnvSpec::NArms { n, .. } => (n, n - 1),
    }
}
