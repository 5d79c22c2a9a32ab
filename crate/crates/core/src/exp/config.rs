//! Flat key-value experiment configuration.
//!
//! The format is one `key = value` pair per line, `#` starts a comment, no
//! nesting. Every experiment provides defaults for all of its knobs, so a
//! config only has to name the experiment and whatever it overrides:
//!
//! ```text
//! experiment = chaos_scaling
//! seed = 7
//! n_list = 8,16,32,64
//! h = 2e-3
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Keys accepted anywhere; unknown keys are config errors so typos surface
/// during `check` rather than silently running defaults.
pub const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "seed",
    "h",
    "t_end",
    "dim",
    "n_particles",
    "n_list",
    "m_cloud",
    "m_ref",
    "replicas",
    "record_every",
    "potential_u",
    "potential_v",
    "sigma0",
    "geo_a1",
    "geo_a2",
    "geo_sigma0",
    "x0",
    "mu0_mean",
    "condition",
    "box_lo",
    "box_hi",
    "n_samples",
    "sphere_potential",
    "sphere_beta",
    "cap",
    "eps",
    "lambda_envelope",
    "burn_in",
    "out",
    "plots",
];

/// Parsed experiment description: the experiment name plus overriding knobs.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(experiment: impl Into<String>) -> Self {
        ExperimentConfig { experiment: experiment.into(), seed: 1, values: BTreeMap::new() }
    }

    /// Parses the flat key-value format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        let experiment = values
            .remove("experiment")
            .ok_or_else(|| Error::Config("missing required key 'experiment'".into()))?;
        let seed = match values.remove("seed") {
            Some(s) => s
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("seed '{s}' is not an integer")))?,
            None => 1,
        };
        Ok(ExperimentConfig { experiment, seed, values })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.values.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        self.values.get(key).cloned().unwrap_or_else(|| default.to_string())
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("key '{key}': '{s}' is not a number"))),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.values.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("key '{key}': '{s}' is not a count"))),
        }
    }

    pub fn get_usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|part| {
                    part.trim().parse::<usize>().map_err(|_| {
                        Error::Config(format!("key '{key}': '{part}' is not a count"))
                    })
                })
                .collect(),
        }
    }

    /// Positive-value guard used by knob validation.
    pub fn require_positive(&self, key: &str, value: f64) -> Result<f64> {
        if value > 0.0 {
            Ok(value)
        } else {
            Err(Error::Config(format!("key '{key}' must be positive (got {value})")))
        }
    }

    /// Canonical one-line-per-key echo embedded in result metadata.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "experiment={}; seed={}", self.experiment, self.seed);
        for (k, v) in &self.values {
            let _ = write!(out, "; {k}={v}");
        }
        out
    }
}
