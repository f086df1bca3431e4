//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. `agent` may repeat; every other
//! key appears at most once. Agent lines take a name followed by optional
//! `key=value` hyperparameters, e.g. `agent = noisy-uniform eps=0.3`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mrpe_core::agents::{GvfConfig, SfNrConfig};
use mrpe_core::allocation::SolveMethod;
use mrpe_core::envs::EnvSpec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("invalid value for `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn value_error(key: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.to_string(),
    }
}

/// How reward sets are attached to the target policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// `k` distinct canonical vectors per policy.
    Finite { k: usize },
    /// The whole box `[0,1]^S` for every policy.
    RewardFree,
    /// The whole box for a single target policy.
    SinglePolicyRewardFree,
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardMode::Finite { k } => write!(f, "finite k={k}"),
            RewardMode::RewardFree => write!(f, "reward_free"),
            RewardMode::SinglePolicyRewardFree => write!(f, "single_policy_reward_free"),
        }
    }
}

impl FromStr for RewardMode {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut words = text.split_whitespace();
        match words.next() {
            Some("finite") => {
                let mut k = 3;
                for word in words {
                    match word.split_once('=') {
                        Some(("k", v)) => k = v.parse().map_err(|e| format!("k: {e}"))?,
                        _ => return Err(format!("unexpected `{word}`")),
                    }
                }
                if k == 0 {
                    return Err("k must be positive".into());
                }
                Ok(RewardMode::Finite { k })
            }
            Some("reward_free") if words.next().is_none() => Ok(RewardMode::RewardFree),
            Some("single_policy_reward_free") if words.next().is_none() => Ok(RewardMode::SinglePolicyRewardFree),
            _ => Err(format!("unknown reward mode `{text}`")),
        }
    }
}

/// One agent line of the configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentSpec {
    MrNas {
        alpha: f64,
        beta: f64,
        recompute_period: u64,
        method: SolveMethod,
    },
    NoisyUniform {
        eps: f64,
    },
    NoisyVisitation,
    SfNr(SfNrConfig),
    Gvf(GvfConfig),
}

impl AgentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AgentSpec::MrNas { .. } => "mrnas",
            AgentSpec::NoisyUniform { .. } => "noisy-uniform",
            AgentSpec::NoisyVisitation => "noisy-visitation",
            AgentSpec::SfNr(_) => "sfnr",
            AgentSpec::Gvf(_) => "gvf",
        }
    }

    pub fn mrnas() -> Self {
        AgentSpec::MrNas {
            alpha: 0.99,
            beta: 0.01,
            recompute_period: 500,
            method: SolveMethod::Epigraph,
        }
    }
}

fn parse_param<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| format!("{key}: {e}"))
}

impl FromStr for AgentSpec {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut words = text.split_whitespace();
        let name = words.next().ok_or("empty agent line")?;
        let mut spec = match name {
            "mrnas" => AgentSpec::mrnas(),
            "noisy-uniform" => AgentSpec::NoisyUniform { eps: 0.3 },
            "noisy-visitation" => AgentSpec::NoisyVisitation,
            "sfnr" => AgentSpec::SfNr(SfNrConfig::default()),
            "gvf" => AgentSpec::Gvf(GvfConfig::default()),
            other => return Err(format!("unknown agent `{other}`")),
        };
        for word in words {
            let (key, value) = word
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{word}`"))?;
            match (&mut spec, key) {
                (AgentSpec::MrNas { alpha, .. }, "alpha") => *alpha = parse_param(key, value)?,
                (AgentSpec::MrNas { beta, .. }, "beta") => *beta = parse_param(key, value)?,
                (AgentSpec::MrNas { recompute_period, .. }, "period") => *recompute_period = parse_param(key, value)?,
                (AgentSpec::MrNas { method, .. }, "method") => {
                    *method = match value {
                        "epigraph" => SolveMethod::Epigraph,
                        "bisection" => SolveMethod::Bisection,
                        _ => return Err(format!("unknown method `{value}`")),
                    }
                }
                (AgentSpec::NoisyUniform { eps }, "eps") => *eps = parse_param(key, value)?,
                (AgentSpec::SfNr(cfg), "temperature") => cfg.temperature = parse_param(key, value)?,
                (AgentSpec::SfNr(cfg), "gamma_psi") => cfg.gamma_psi = parse_param(key, value)?,
                (AgentSpec::Gvf(cfg), "mix") => cfg.mix = parse_param(key, value)?,
                (AgentSpec::Gvf(cfg), "period") => cfg.recompute_period = parse_param(key, value)?,
                _ => return Err(format!("agent `{name}` has no parameter `{key}`")),
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub gamma: f64,
    pub eps: f64,
    pub delta: f64,
    pub n_policies: usize,
    pub reward_mode: RewardMode,
    pub agents: Vec<AgentSpec>,
    pub horizon: u64,
    pub eval_period: u64,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Monte-Carlo runs of the stopping check.
    pub runs: usize,
    /// Step budget of a stopping-check run.
    pub max_steps: u64,
    /// Environment sizes swept by the complexity command.
    pub sweep: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvSpec::riverswim(5),
            gamma: 0.9,
            eps: 0.1,
            delta: 0.1,
            n_policies: 3,
            reward_mode: RewardMode::Finite { k: 3 },
            agents: Vec::new(),
            horizon: 50_000,
            eval_period: 500,
            seeds: (0..10).collect(),
            output: PathBuf::from("results"),
            runs: 50,
            max_steps: 5_000_000,
            sweep: Vec::new(),
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(|w| w.parse().map_err(|e| value_error(key, e)))
        .collect()
}

/// Integer ranges `a..b` are accepted as seed lists.
fn parse_seeds(value: &str) -> Result<Vec<u64>, ConfigError> {
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|e| value_error("seeds", e))?;
        let hi: u64 = hi.trim().parse().map_err(|e| value_error("seeds", e))?;
        return Ok((lo..hi).collect());
    }
    parse_list("seeds", value)
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| value_error(key, e))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: format!("expected key = value, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key != "agent" && seen.insert(key.to_string(), i).is_some() {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
            match key {
                "env" => cfg.env = value.parse().map_err(|e| value_error(key, e))?,
                "gamma" => cfg.gamma = parse_scalar(key, value)?,
                "eps" => cfg.eps = parse_scalar(key, value)?,
                "delta" => cfg.delta = parse_scalar(key, value)?,
                "n_policies" => cfg.n_policies = parse_scalar(key, value)?,
                "reward_mode" => cfg.reward_mode = value.parse().map_err(|e: String| value_error(key, e))?,
                "agent" => cfg.agents.push(value.parse().map_err(|e: String| value_error(key, e))?),
                "horizon" => cfg.horizon = parse_scalar(key, value)?,
                "eval_period" => cfg.eval_period = parse_scalar(key, value)?,
                "seeds" => cfg.seeds = parse_seeds(value)?,
                "output" => cfg.output = PathBuf::from(value),
                "runs" => cfg.runs = parse_scalar(key, value)?,
                "max_steps" => cfg.max_steps = parse_scalar(key, value)?,
                "sweep" => cfg.sweep = parse_list(key, value)?,
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Number of target policies actually drawn.
    pub fn policy_count(&self) -> usize {
        match self.reward_mode {
            RewardMode::SinglePolicyRewardFree => 1,
            _ => self.n_policies,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return invalid(format!("gamma = {} outside (0, 1)", self.gamma));
        }
        let eps_max = 1.0 / (2.0 * (1.0 - self.gamma));
        if !(self.eps > 0.0 && self.eps < eps_max) {
            return invalid(format!("eps = {} outside (0, {eps_max})", self.eps));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return invalid(format!("delta = {} outside (0, 0.5)", self.delta));
        }
        if self.eval_period == 0 || self.horizon < self.eval_period {
            return invalid(format!(
                "need horizon >= eval_period >= 1, got {} and {}",
                self.horizon, self.eval_period
            ));
        }
        if self.seeds.is_empty() {
            return invalid("no seeds".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return invalid("seeds must be distinct".into());
        }
        if self.n_policies == 0 {
            return invalid("n_policies must be positive".into());
        }
        let mut names: Vec<&str> = self.agents.iter().map(AgentSpec::name).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return invalid("each agent may appear once".into());
        }
        if self.runs == 0 || self.max_steps == 0 {
            return invalid("runs and max_steps must be positive".into());
        }
        Ok(())
    }
}
