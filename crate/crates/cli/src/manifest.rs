//! Reproducibility manifest: every subcommand records its resolved
//! configuration, seed, and input-file checksums next to its outputs. The
//! document is deterministic — sorted keys, no timestamps — so identical runs
//! produce byte-identical manifests.

use std::path::Path;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot hash {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Write `manifest.json` into the output directory. `data_files` are named
/// input files to checksum; `outputs` are the file names this run produced
/// (recorded sorted).
pub fn write_manifest(
    cfg: &ExperimentConfig,
    subcommand: &str,
    config_path: &Path,
    data_files: &[(&str, &Path)],
    outputs: &[String],
) -> Result<(), CliError> {
    let mut data = serde_json::Map::new();
    for (name, path) in data_files {
        data.insert(
            (*name).to_string(),
            json!({
                "path": path.display().to_string(),
                "sha256": sha256_file(path)?,
            }),
        );
    }
    let mut sorted_outputs: Vec<&String> = outputs.iter().collect();
    sorted_outputs.sort();

    let doc = json!({
        "subcommand": subcommand,
        "scale": cfg.scale.name(),
        "seed": cfg.solver.seed,
        "config_file": {
            "path": config_path.display().to_string(),
            "sha256": sha256_file(config_path)?,
        },
        "solver": cfg.solver,
        "experiment": {
            "digits": cfg.digits,
            "train_size": cfg.train_size,
            "test_size": cfg.test_size,
            "validation_train_size": cfg.validation_train_size,
            "validation_test_size": cfg.validation_test_size,
            "downsample_factor": cfg.downsample_factor,
            "normalize": cfg.normalize,
            "alpha1": cfg.alpha1,
            "alpha2": cfg.alpha2,
            "fixed_ks": cfg.fixed_ks,
            "sweep_theta2": cfg.sweep_theta2,
            "validate_k": cfg.validate_k,
            "validate_thetas": cfg.validate_thetas,
            "audit_fixed_certificates": cfg.audit_fixed_certificates,
        },
        "data_files": data,
        "outputs": sorted_outputs,
    });
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Solver(format!("manifest serialisation: {e}")))?;
    let path = cfg.out_dir.join("manifest.json");
    std::fs::write(&path, text + "\n")
        .map_err(|e| CliError::Solver(format!("cannot write {}: {e}", path.display())))
}
