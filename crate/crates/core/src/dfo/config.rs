//! Flat key-value solver configuration.
//!
//! The document is TOML with only top-level scalar/array keys. Missing keys
//! fall back to the defaults below; unknown keys are an error (they are
//! almost always typos of known ones).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("configuration parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("configuration invalid: {0}")]
    Invalid(String),
}

/// Which accuracy policy drives lower-level solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    /// Certified accuracy tied to the trust-region radius.
    Dynamic,
    /// The same fixed iteration count for every solve.
    Fixed,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Initial trust-region radius.
    pub delta0: f64,
    /// Stop once the radius falls to this value.
    pub delta_min: f64,
    /// Radius growth cap.
    pub delta_max: f64,
    /// Acceptance threshold for the ratio test.
    pub eta1: f64,
    /// Threshold above which the radius grows.
    pub eta2: f64,
    /// Radius shrink factor on rejection.
    pub gamma_dec: f64,
    /// Radius growth factor on strong acceptance.
    pub gamma_inc: f64,
    /// Accuracy constant: demand `‖w - ŵ‖ ≤ c·Δ²`.
    pub c: f64,
    /// Cap on the demanded squared-distance accuracy.
    pub eps_max: f64,
    /// Total budget of counted evaluations (initialisation, trials,
    /// geometry points).
    pub eval_budget: usize,
    pub mode: ModeKind,
    /// Iteration count used when `mode = "fixed"`.
    #[serde(rename = "fixed_K")]
    pub fixed_k: usize,
    /// Starting hyperparameters.
    pub theta0: Vec<f64>,
    pub bounds_lo: Vec<f64>,
    pub bounds_hi: Vec<f64>,
    /// Seed for data shuffles and instance generation; the solver loop itself
    /// is deterministic and draws nothing.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            delta0: 0.1,
            delta_min: 1e-5,
            delta_max: 1e3,
            eta1: 0.1,
            eta2: 0.7,
            gamma_dec: 0.5,
            gamma_inc: 2.0,
            c: 100.0,
            eps_max: 1e2,
            eval_budget: 80,
            mode: ModeKind::Dynamic,
            fixed_k: 200,
            theta0: vec![1.0, 1.0],
            bounds_lo: vec![-8.0, -8.0],
            bounds_hi: vec![8.0, 8.0],
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SolverConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.delta0 > 0.0 && self.delta_min > 0.0 && self.delta_max >= self.delta0) {
            return bad(format!(
                "radii must satisfy 0 < delta_min, 0 < delta0 <= delta_max (got {}, {}, {})",
                self.delta_min, self.delta0, self.delta_max
            ));
        }
        if !(0.0 < self.eta1 && self.eta1 <= self.eta2 && self.eta2 < 1.0) {
            return bad(format!(
                "need 0 < eta1 <= eta2 < 1 (got {}, {})",
                self.eta1, self.eta2
            ));
        }
        if !(0.0 < self.gamma_dec && self.gamma_dec < 1.0 && self.gamma_inc > 1.0) {
            return bad(format!(
                "need 0 < gamma_dec < 1 < gamma_inc (got {}, {})",
                self.gamma_dec, self.gamma_inc
            ));
        }
        if !(self.c > 0.0) || !(self.eps_max > 0.0) {
            return bad(format!(
                "accuracy constants must be positive (c = {}, eps_max = {})",
                self.c, self.eps_max
            ));
        }
        if self.mode == ModeKind::Fixed && self.fixed_k == 0 {
            return bad("fixed_K must be positive in fixed mode".to_string());
        }
        let m = self.theta0.len();
        if m == 0 || self.bounds_lo.len() != m || self.bounds_hi.len() != m {
            return bad(format!(
                "theta0/bounds_lo/bounds_hi must share a positive length (got {}, {}, {})",
                m,
                self.bounds_lo.len(),
                self.bounds_hi.len()
            ));
        }
        for i in 0..m {
            if !(self.bounds_lo[i] < self.bounds_hi[i]) {
                return bad(format!(
                    "bounds_lo[{i}] = {} must be below bounds_hi[{i}] = {}",
                    self.bounds_lo[i], self.bounds_hi[i]
                ));
            }
        }
        Ok(())
    }
}
