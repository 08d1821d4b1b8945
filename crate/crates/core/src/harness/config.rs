use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lra::{LearningRate, LraHyperParams};
use crate::objectives::{Function, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Lra,
    Fixed,
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lra" => Ok(AlgorithmKind::Lra),
            "fixed" | "fixed-eta" => Ok(AlgorithmKind::Fixed),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm '{other}' (expected lra or fixed)"
            ))),
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgorithmKind::Lra => "lra",
            AlgorithmKind::Fixed => "fixed",
        })
    }
}

pub const DEFAULT_TARGET: f64 = 1e-8;
pub const NOISELESS_BUDGET: u64 = 10_000_000;
pub const NOISY_BUDGET: u64 = 100_000_000;
pub const NOISELESS_TRIALS: usize = 30;
pub const NOISY_TRIALS: usize = 20;

/// One experiment setting. Field names double as config-file keys and CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub objective: String,
    pub dim: usize,
    pub noise_variance: f64,
    /// Evaluate the objective under a random rotation drawn per trial.
    pub rotate: bool,
    pub algorithm: AlgorithmKind,
    /// Constant factors for the `fixed` algorithm.
    pub eta_m: f64,
    pub eta_sigma: f64,
    pub lambda: Option<usize>,
    pub alpha: f64,
    pub beta_m: f64,
    pub beta_sigma: f64,
    pub gamma: f64,
    /// Maximum evaluations; defaults to 1e7 noiseless, 1e8 noisy.
    pub budget: Option<u64>,
    pub target: f64,
    pub seed: u64,
    /// Defaults to 30 noiseless, 20 noisy.
    pub trials: Option<usize>,
    /// Record every k-th iteration in the history; 0 disables history.
    pub history_stride: u64,
    /// Number of geometric ECDF targets.
    pub n_targets: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hp = LraHyperParams::default();
        RunConfig {
            objective: "sphere".into(),
            dim: 10,
            noise_variance: 0.0,
            rotate: false,
            algorithm: AlgorithmKind::Lra,
            eta_m: 1.0,
            eta_sigma: 1.0,
            lambda: None,
            alpha: hp.alpha,
            beta_m: hp.beta_m,
            beta_sigma: hp.beta_sigma,
            gamma: hp.gamma,
            budget: None,
            target: DEFAULT_TARGET,
            seed: 0,
            trials: None,
            history_stride: 10,
            n_targets: 30,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "objective",
    "dim",
    "noise_variance",
    "rotate",
    "algorithm",
    "eta_m",
    "eta_sigma",
    "eta",
    "lambda",
    "alpha",
    "beta_m",
    "beta_sigma",
    "gamma",
    "budget",
    "target",
    "seed",
    "trials",
    "history_stride",
    "n_targets",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse '{value}'")))
}

/// Integers written in float notation (`1e7`) are accepted for counts.
fn parse_count(key: &str, value: &str) -> Result<u64> {
    if let Ok(v) = value.trim().parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = parse(key, value)?;
    if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 {
        Ok(f as u64)
    } else {
        Err(Error::InvalidConfig(format!(
            "{key}: '{value}' is not a nonnegative integer"
        )))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Sets one field from its textual value; `eta` sets both fixed factors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "objective" => self.objective = value.trim().to_ascii_lowercase(),
            "dim" => self.dim = parse_count(key, value)? as usize,
            "noise_variance" => self.noise_variance = parse(key, value)?,
            "rotate" => self.rotate = parse(key, value)?,
            "algorithm" => self.algorithm = value.parse()?,
            "eta_m" => self.eta_m = parse(key, value)?,
            "eta_sigma" => self.eta_sigma = parse(key, value)?,
            "eta" => {
                self.eta_m = parse(key, value)?;
                self.eta_sigma = self.eta_m;
            }
            "lambda" => self.lambda = Some(parse_count(key, value)? as usize),
            "alpha" => self.alpha = parse(key, value)?,
            "beta_m" => self.beta_m = parse(key, value)?,
            "beta_sigma" => self.beta_sigma = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "budget" => self.budget = Some(parse_count(key, value)?),
            "target" => self.target = parse(key, value)?,
            "seed" => self.seed = parse_count(key, value)?,
            "trials" => self.trials = Some(parse_count(key, value)? as usize),
            "history_stride" => self.history_stride = parse_count(key, value)?,
            "n_targets" => self.n_targets = parse_count(key, value)? as usize,
            other => return Err(Error::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn is_noisy(&self) -> bool {
        self.noise_variance > 0.0
    }

    pub fn budget(&self) -> u64 {
        self.budget.unwrap_or(if self.is_noisy() {
            NOISY_BUDGET
        } else {
            NOISELESS_BUDGET
        })
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(if self.is_noisy() {
            NOISY_TRIALS
        } else {
            NOISELESS_TRIALS
        })
    }

    pub fn hyper_params(&self) -> LraHyperParams {
        LraHyperParams {
            alpha: self.alpha,
            beta_m: self.beta_m,
            beta_sigma: self.beta_sigma,
            gamma: self.gamma,
        }
    }

    pub fn learning_rate(&self) -> LearningRate {
        match self.algorithm {
            AlgorithmKind::Lra => LearningRate::Adaptive(self.hyper_params()),
            AlgorithmKind::Fixed => LearningRate::Fixed {
                eta_m: self.eta_m,
                eta_sigma: self.eta_sigma,
            },
        }
    }

    /// Short label used for ECDF columns and summaries.
    pub fn algorithm_label(&self) -> String {
        match self.algorithm {
            AlgorithmKind::Lra => "lra".into(),
            AlgorithmKind::Fixed => format!("fixed_{}_{}", self.eta_m, self.eta_sigma),
        }
    }

    pub fn function(&self) -> Result<Function> {
        Function::from_name(&self.objective)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.function()?;
        Objective::new(f, self.dim, self.noise_variance)?;
        self.learning_rate().validate()?;
        if let Some(l) = self.lambda {
            if l < 2 {
                return Err(Error::InvalidConfig(format!("lambda must be at least 2, got {l}")));
            }
        }
        if !(self.target.is_finite()) {
            return Err(Error::InvalidConfig("target must be finite".into()));
        }
        if self.trials() == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.n_targets == 0 {
            return Err(Error::InvalidConfig("n_targets must be at least 1".into()));
        }
        Ok(())
    }
}
