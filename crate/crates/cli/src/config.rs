//! Experiment configuration.
//!
//! One flat TOML document carries both the solver keys (handed through to
//! [`SolverConfig`]) and the data/experiment keys defined here. Keys the
//! document leaves unset fall back to the active scale preset, then to the
//! solver defaults; command-line flags (`--out`, `--seed`, `--scale`)
//! override the document. Unknown keys are an error.

use std::fs;
use std::path::{Path, PathBuf};

use bilevel_core::data::SplitSpec;
use bilevel_core::dfo::SolverConfig;
use bilevel_core::problems::HyperPoint;
use nalgebra::DVector;
use serde::Deserialize;

use crate::CliError;

/// Scale presets trade run time against fidelity: `desk` finishes in minutes
/// on ordinary hardware, `paper` is the full-size configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ScalePreset {
    Desk,
    Paper,
}

impl ScalePreset {
    pub fn name(self) -> &'static str {
        match self {
            ScalePreset::Desk => "desk",
            ScalePreset::Paper => "paper",
        }
    }
}

struct PresetValues {
    digits: &'static [u8],
    train_size: usize,
    test_size: usize,
    validation_train_size: usize,
    validation_test_size: usize,
    downsample_factor: usize,
    normalize: bool,
    eval_budget: usize,
}

fn preset_values(scale: ScalePreset) -> PresetValues {
    match scale {
        // Reduced sizes; raw (unnormalised) pixel features keep the
        // lower-level curvature strong enough that accuracy policies separate
        // visibly at this scale.
        ScalePreset::Desk => PresetValues {
            digits: &[0, 1],
            train_size: 500,
            test_size: 200,
            validation_train_size: 500,
            validation_test_size: 200,
            downsample_factor: 4,
            normalize: false,
            eval_budget: 40,
        },
        ScalePreset::Paper => PresetValues {
            digits: &[0, 1, 2, 3, 4, 5],
            train_size: 5000,
            test_size: 1000,
            validation_train_size: 5000,
            validation_test_size: 1000,
            downsample_factor: 1,
            normalize: true,
            eval_budget: 80,
        },
    }
}

/// Top-level keys routed to [`SolverConfig`]; everything else must be an
/// experiment key.
const SOLVER_KEYS: &[&str] = &[
    "delta0",
    "delta_min",
    "delta_max",
    "eta1",
    "eta2",
    "gamma_dec",
    "gamma_inc",
    "c",
    "eps_max",
    "eval_budget",
    "mode",
    "fixed_K",
    "theta0",
    "bounds_lo",
    "bounds_hi",
    "seed",
];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentKeys {
    images_path: Option<PathBuf>,
    labels_path: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    digits: Option<Vec<u8>>,
    train_size: Option<usize>,
    test_size: Option<usize>,
    validation_train_size: Option<usize>,
    validation_test_size: Option<usize>,
    downsample_factor: Option<usize>,
    normalize: Option<bool>,
    alpha1: Option<f64>,
    alpha2: Option<f64>,
    fixed_ks: Option<Vec<usize>>,
    sweep_theta2: Option<Vec<f64>>,
    validate_k: Option<usize>,
    validate_thetas: Option<Vec<[f64; 2]>>,
    thetas_from: Option<PathBuf>,
    audit_fixed_certificates: Option<bool>,
    max_inner_iterations: Option<usize>,
}

/// Command-line overrides applied on top of the document.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub scale: Option<ScalePreset>,
}

/// Fully resolved configuration: the solver settings plus everything the
/// subcommands need.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub solver: SolverConfig,
    pub scale: ScalePreset,
    pub images_path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub digits: Vec<u8>,
    pub train_size: usize,
    pub test_size: usize,
    pub validation_train_size: usize,
    pub validation_test_size: usize,
    pub downsample_factor: usize,
    pub normalize: bool,
    /// Weight of the conditioning penalty in the upper objective.
    pub alpha1: f64,
    /// Weight of the sparsity-reward penalty in the upper objective.
    pub alpha2: f64,
    /// Fixed iteration counts run alongside the dynamic policy.
    pub fixed_ks: Vec<usize>,
    /// Starting values of θ₂ for the robustness sweep.
    pub sweep_theta2: Vec<f64>,
    /// Fixed iteration count used when scoring held-out tasks.
    pub validate_k: usize,
    pub validate_thetas: Vec<[f64; 2]>,
    /// Optional tune-summary CSV to pull (variant, final θ) pairs from.
    pub thetas_from: Option<PathBuf>,
    /// Attach diagnostic certificates to fixed-iteration solves.
    pub audit_fixed_certificates: bool,
    /// Safety cap on inner iterations per certified solve.
    pub max_inner_iterations: usize,
}

impl ExperimentConfig {
    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            train_size: self.train_size,
            test_size: self.test_size,
            validation_train_size: self.validation_train_size,
            validation_test_size: self.validation_test_size,
            seed: self.solver.seed,
            downsample_factor: self.downsample_factor,
            normalize: self.normalize,
        }
    }

    /// Hyperparameter box with the configured starting point.
    pub fn template(&self) -> Result<HyperPoint, CliError> {
        HyperPoint::new(
            DVector::from_vec(self.solver.theta0.clone()),
            DVector::from_vec(self.solver.bounds_lo.clone()),
            DVector::from_vec(self.solver.bounds_hi.clone()),
        )
        .map_err(|e| CliError::Config(format!("hyperparameter box: {e}")))
    }

    /// One-line description of the active scale for emitted summaries.
    pub fn scale_line(&self) -> String {
        format!(
            "{} (digits {:?}, train {}, test {}, validation {}/{}, downsample {}, \
             normalize {}, eval budget {})",
            self.scale.name(),
            self.digits,
            self.train_size,
            self.test_size,
            self.validation_train_size,
            self.validation_test_size,
            self.downsample_factor,
            self.normalize,
            self.solver.eval_budget,
        )
    }
}

pub fn load(path: &Path, overrides: &CliOverrides) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_str(&text, overrides)
}

pub fn parse_str(text: &str, overrides: &CliOverrides) -> Result<ExperimentConfig, CliError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Config(format!("TOML parse error: {e}")))?;
    let explicit_budget = table.contains_key("eval_budget");

    let mut solver_table = toml::Table::new();
    let mut experiment_table = toml::Table::new();
    for (key, value) in table {
        if SOLVER_KEYS.contains(&key.as_str()) {
            solver_table.insert(key, value);
        } else {
            experiment_table.insert(key, value);
        }
    }
    let mut solver: SolverConfig = toml::Value::Table(solver_table)
        .try_into()
        .map_err(|e| CliError::Config(format!("solver keys: {e}")))?;
    let keys: ExperimentKeys = toml::Value::Table(experiment_table)
        .try_into()
        .map_err(|e| CliError::Config(format!("experiment keys: {e}")))?;

    let scale = overrides.scale.unwrap_or(ScalePreset::Desk);
    let preset = preset_values(scale);
    if !explicit_budget {
        solver.eval_budget = preset.eval_budget;
    }
    if let Some(seed) = overrides.seed {
        solver.seed = seed;
    }
    solver
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let out_dir = overrides
        .out
        .clone()
        .or(keys.out_dir)
        .unwrap_or_else(|| PathBuf::from("results"));

    let cfg = ExperimentConfig {
        solver,
        scale,
        images_path: keys.images_path,
        labels_path: keys.labels_path,
        out_dir,
        digits: keys.digits.unwrap_or_else(|| preset.digits.to_vec()),
        train_size: keys.train_size.unwrap_or(preset.train_size),
        test_size: keys.test_size.unwrap_or(preset.test_size),
        validation_train_size: keys
            .validation_train_size
            .unwrap_or(preset.validation_train_size),
        validation_test_size: keys
            .validation_test_size
            .unwrap_or(preset.validation_test_size),
        downsample_factor: keys.downsample_factor.unwrap_or(preset.downsample_factor),
        normalize: keys.normalize.unwrap_or(preset.normalize),
        alpha1: keys.alpha1.unwrap_or(1e-8),
        alpha2: keys.alpha2.unwrap_or(1.0),
        fixed_ks: keys.fixed_ks.unwrap_or_else(|| vec![20, 200, 2000]),
        sweep_theta2: keys
            .sweep_theta2
            .unwrap_or_else(|| vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]),
        validate_k: keys.validate_k.unwrap_or(2000),
        validate_thetas: keys.validate_thetas.unwrap_or_default(),
        thetas_from: keys.thetas_from,
        audit_fixed_certificates: keys.audit_fixed_certificates.unwrap_or(false),
        max_inner_iterations: keys
            .max_inner_iterations
            .unwrap_or(bilevel_core::composite::DEFAULT_MAX_ITERATIONS),
    };
    validate_experiment(&cfg)?;
    Ok(cfg)
}

fn validate_experiment(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let bad = |msg: String| Err(CliError::Config(msg));
    if cfg.solver.theta0.len() != 2 {
        return bad(format!(
            "the experiment pipeline works on two hyperparameters; theta0 has {}",
            cfg.solver.theta0.len()
        ));
    }
    if cfg.digits.is_empty() {
        return bad("digits must not be empty".into());
    }
    for &d in &cfg.digits {
        if d > 9 {
            return bad(format!("digit {d} is not a decimal digit"));
        }
    }
    let mut seen = [false; 10];
    for &d in &cfg.digits {
        if std::mem::replace(&mut seen[d as usize], true) {
            return bad(format!("digit {d} is listed twice"));
        }
    }
    if cfg.train_size == 0 || cfg.test_size == 0 {
        return bad("train_size and test_size must be positive".into());
    }
    if cfg.downsample_factor == 0 {
        return bad("downsample_factor must be at least 1".into());
    }
    if !(cfg.alpha1 >= 0.0 && cfg.alpha1.is_finite() && cfg.alpha2 >= 0.0 && cfg.alpha2.is_finite())
    {
        return bad(format!(
            "alpha1/alpha2 must be finite and nonnegative (got {}, {})",
            cfg.alpha1, cfg.alpha2
        ));
    }
    if cfg.fixed_ks.is_empty() || cfg.fixed_ks.contains(&0) {
        return bad("fixed_ks must list positive iteration counts".into());
    }
    if cfg.sweep_theta2.is_empty() {
        return bad("sweep_theta2 must not be empty".into());
    }
    if cfg.validate_k == 0 {
        return bad("validate_k must be positive".into());
    }
    if cfg.max_inner_iterations == 0 {
        return bad("max_inner_iterations must be positive".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_overrides() -> CliOverrides {
        CliOverrides::default()
    }

    #[test]
    fn empty_document_resolves_to_the_desk_preset() {
        let cfg = parse_str("", &no_overrides()).unwrap();
        assert_eq!(cfg.scale, ScalePreset::Desk);
        assert_eq!(cfg.digits, vec![0, 1]);
        assert_eq!(cfg.train_size, 500);
        assert_eq!(cfg.test_size, 200);
        assert_eq!(cfg.downsample_factor, 4);
        assert!(!cfg.normalize);
        assert_eq!(cfg.solver.eval_budget, 40);
        assert_eq!(cfg.fixed_ks, vec![20, 200, 2000]);
        assert_eq!(cfg.solver.theta0, vec![1.0, 1.0]);
        assert_eq!(cfg.solver.delta_min, 1e-5);
        assert_eq!(cfg.alpha1, 1e-8);
        assert_eq!(cfg.alpha2, 1.0);
    }

    #[test]
    fn paper_scale_fills_the_full_size_values() {
        let over = CliOverrides {
            scale: Some(ScalePreset::Paper),
            ..CliOverrides::default()
        };
        let cfg = parse_str("", &over).unwrap();
        assert_eq!(cfg.digits, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(cfg.train_size, 5000);
        assert_eq!(cfg.test_size, 1000);
        assert_eq!(cfg.downsample_factor, 1);
        assert!(cfg.normalize);
        assert_eq!(cfg.solver.eval_budget, 80);
        assert_eq!(cfg.solver.c, 100.0);
        assert_eq!(cfg.solver.delta_min, 1e-5);
        assert_eq!(cfg.solver.theta0, vec![1.0, 1.0]);
        assert_eq!(cfg.validate_k, 2000);
    }

    #[test]
    fn document_keys_beat_the_preset_and_flags_beat_the_document() {
        let text = "eval_budget = 12\nseed = 7\ntrain_size = 64\n";
        let cfg = parse_str(text, &no_overrides()).unwrap();
        assert_eq!(cfg.solver.eval_budget, 12);
        assert_eq!(cfg.solver.seed, 7);
        assert_eq!(cfg.train_size, 64);

        let over = CliOverrides {
            seed: Some(99),
            out: Some(PathBuf::from("elsewhere")),
            scale: None,
        };
        let cfg = parse_str(text, &over).unwrap();
        assert_eq!(cfg.solver.seed, 99);
        assert_eq!(cfg.out_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn unknown_keys_are_a_configuration_error() {
        let err = parse_str("train_siez = 10\n", &no_overrides()).unwrap_err();
        match err {
            CliError::Config(msg) => assert!(msg.contains("train_siez"), "{msg}"),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn solver_keys_are_routed_to_the_solver_parser() {
        let cfg = parse_str("fixed_K = 77\nmode = \"fixed\"\n", &no_overrides()).unwrap();
        assert_eq!(cfg.solver.fixed_k, 77);
    }

    #[test]
    fn duplicate_digits_are_rejected() {
        let err = parse_str("digits = [1, 1]\n", &no_overrides()).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn split_spec_carries_the_solver_seed() {
        let over = CliOverrides {
            seed: Some(31),
            ..CliOverrides::default()
        };
        let cfg = parse_str("", &over).unwrap();
        assert_eq!(cfg.split().seed, 31);
        assert_eq!(cfg.split().downsample_factor, 4);
    }
}
