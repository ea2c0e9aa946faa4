//! Subcommand implementations and their shared plumbing.

pub mod bounds_compare;
pub mod sweep;
pub mod tune;
pub mod validate;

use std::fs;
use std::path::{Path, PathBuf};

use bilevel_core::data::{read_idx, IdxFile, RawImages};
use bilevel_core::data::make_binary_task;
use bilevel_core::dfo::{ConsumedEval, ElasticNetObjective, ModeKind, SolverConfig, StopReason};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Lossless float formatting shared by every emitted CSV (17 significant
/// digits round-trip any finite `f64`).
pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| {
        CliError::Config(format!(
            "cannot create output directory {}: {e}",
            cfg.out_dir.display()
        ))
    })
}

/// Write one output file, mapping failures to solver-stage errors (the
/// computation succeeded; only the flush failed).
pub(crate) fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Solver(format!("cannot write {}: {e}", path.display())))
}

/// Load the image/label pool named by the configuration.
pub(crate) fn load_pool(cfg: &ExperimentConfig) -> Result<(RawImages, Vec<u8>), CliError> {
    let images_path = cfg.images_path.as_ref().ok_or_else(|| {
        CliError::Config("this subcommand needs the images_path key".to_string())
    })?;
    let labels_path = cfg.labels_path.as_ref().ok_or_else(|| {
        CliError::Config("this subcommand needs the labels_path key".to_string())
    })?;
    let images = match read_idx(images_path).map_err(|e| CliError::Config(e.to_string()))? {
        IdxFile::Images(images) => images,
        IdxFile::Labels(_) => {
            return Err(CliError::Config(format!(
                "{} holds labels, not images",
                images_path.display()
            )))
        }
    };
    let labels = match read_idx(labels_path).map_err(|e| CliError::Config(e.to_string()))? {
        IdxFile::Labels(labels) => labels,
        IdxFile::Images(_) => {
            return Err(CliError::Config(format!(
                "{} holds images, not labels",
                labels_path.display()
            )))
        }
    };
    Ok((images, labels))
}

/// The tuning objective over the configured digits' tasks.
pub(crate) fn build_objective(cfg: &ExperimentConfig) -> Result<ElasticNetObjective, CliError> {
    let (images, labels) = load_pool(cfg)?;
    let spec = cfg.split();
    let tasks = cfg
        .digits
        .iter()
        .map(|&d| make_binary_task(&images, &labels, d, &spec))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut objective = ElasticNetObjective::new(tasks, cfg.template()?, cfg.alpha1, cfg.alpha2)
        .map_err(|e| CliError::Config(e.to_string()))?;
    objective.audit_fixed = cfg.audit_fixed_certificates;
    objective.max_iterations = cfg.max_inner_iterations;
    Ok(objective)
}

/// The accuracy-policy variants a tuning run compares: the dynamic certified
/// policy first, then one fixed-iteration variant per configured K.
pub(crate) fn variant_list(cfg: &ExperimentConfig) -> Vec<(String, SolverConfig)> {
    let mut variants = Vec::with_capacity(1 + cfg.fixed_ks.len());
    let mut dynamic = cfg.solver.clone();
    dynamic.mode = ModeKind::Dynamic;
    variants.push(("dynamic".to_string(), dynamic));
    for &k in &cfg.fixed_ks {
        let mut fixed = cfg.solver.clone();
        fixed.mode = ModeKind::Fixed;
        fixed.fixed_k = k;
        variants.push((format!("fixed_k{k}"), fixed));
    }
    variants
}

pub(crate) fn stop_reason_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::EvalBudget => "eval_budget",
        StopReason::RadiusMin => "radius_min",
    }
}

/// Check the dynamic-accuracy contract over a run's consumed evaluations:
/// wherever a demand was in force, every per-task certificate must prove it.
pub fn consumed_certificate_audit(consumed: &[ConsumedEval]) -> bool {
    consumed.iter().all(|c| match c.demand {
        Some(demand) => c
            .certificates
            .iter()
            .all(|cert| cert.is_some_and(|v| v <= demand)),
        None => true,
    })
}

/// Data files consumed by task-based subcommands, for the manifest.
pub(crate) fn data_file_list(cfg: &ExperimentConfig) -> Vec<(&'static str, &Path)> {
    let mut files: Vec<(&'static str, &Path)> = Vec::new();
    if let Some(p) = &cfg.images_path {
        files.push(("images", p.as_path()));
    }
    if let Some(p) = &cfg.labels_path {
        files.push(("labels", p.as_path()));
    }
    files
}

pub(crate) fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}
