//! Held-out validation: score learned hyperparameters on all ten digits'
//! one-vs-rest tasks, built from the validation segments of the pool (disjoint
//! from everything tuning ever saw).

use std::fmt::Write as _;
use std::path::Path;

use bilevel_core::dfo::{evaluate_point, AccuracyRequest, ElasticNetObjective, EvalCache};
use bilevel_core::data::validation_tasks;
use bilevel_core::problems::BinaryTask;
use nalgebra::DVector;

use super::{data_file_list, fmt, load_pool, out_path, write_output};
use crate::config::ExperimentConfig;
use crate::manifest::write_manifest;
use crate::CliError;

/// Test accuracy of weights `w` under the inclusive threshold: a score of
/// exactly zero (sigmoid ½) counts as a positive prediction.
fn accuracy(w: &DVector<f64>, task: &BinaryTask) -> f64 {
    let scores = &task.test_features * w;
    let correct = scores
        .iter()
        .zip(task.test_labels.iter())
        .filter(|(score, &label)| (**score >= 0.0) == (label == 1.0))
        .count();
    correct as f64 / scores.len() as f64
}

/// Pull `(variant, [theta1, theta2])` rows out of a tune-summary CSV.
fn read_thetas_from(path: &Path) -> Result<Vec<(String, [f64; 2])>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".to_string()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let col = |name: &str| {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| bad(format!("missing column {name}")))
    };
    let (variant_col, t1_col, t2_col) = (col("variant")?, col("final_theta1")?, col("final_theta2")?);
    let mut thetas = Vec::new();
    for (index, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let need = variant_col.max(t1_col).max(t2_col);
        if fields.len() <= need {
            return Err(bad(format!("row {} has too few fields", index + 2)));
        }
        let parse = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {e}", index + 2)))
        };
        thetas.push((fields[variant_col].to_string(), [parse(t1_col)?, parse(t2_col)?]));
    }
    Ok(thetas)
}

pub fn run(cfg: &ExperimentConfig, config_path: &Path) -> Result<(), CliError> {
    super::ensure_out_dir(cfg)?;

    let mut thetas: Vec<(String, [f64; 2])> = cfg
        .validate_thetas
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("config_{i}"), *t))
        .collect();
    if let Some(path) = &cfg.thetas_from {
        thetas.extend(read_thetas_from(path)?);
    }
    if thetas.is_empty() {
        return Err(CliError::Config(
            "validate needs hyperparameters: set validate_thetas or thetas_from".to_string(),
        ));
    }
    for (label, _) in &thetas {
        if label.contains(',') {
            return Err(CliError::Config(format!(
                "variant label {label:?} contains a comma"
            )));
        }
    }

    let (images, labels) = load_pool(cfg)?;
    let spec = cfg.split();
    if spec.validation_train_size == 0 || spec.validation_test_size == 0 {
        return Err(CliError::Config(
            "validate needs positive validation_train_size and validation_test_size".to_string(),
        ));
    }
    let tasks = validation_tasks(&images, &labels, &spec)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let template = cfg.template()?;
    let mut objective = ElasticNetObjective::new(tasks, template.clone(), cfg.alpha1, cfg.alpha2)
        .map_err(|e| CliError::Config(e.to_string()))?;
    objective.max_iterations = cfg.max_inner_iterations;

    let digit_count = objective.tasks().len();
    let majority: Vec<f64> = objective
        .tasks()
        .iter()
        .map(|task| {
            let positive = task.test_labels.iter().filter(|&&y| y == 1.0).count() as f64
                / task.test_count() as f64;
            positive.max(1.0 - positive)
        })
        .collect();

    // accuracies[digit][variant]
    let mut accuracies = vec![vec![0.0f64; thetas.len()]; digit_count];
    for (column, (_, theta)) in thetas.iter().enumerate() {
        // Hyperparameters from outside the configured box are clipped onto it,
        // matching how the tuner itself would treat them.
        let point = template.clipped(DVector::from_vec(theta.to_vec()));
        let theta = point.theta().clone();
        let mut cache = EvalCache::new();
        evaluate_point(
            &objective,
            &theta,
            &AccuracyRequest::Fixed {
                iterations: cfg.validate_k,
            },
            &mut cache,
        )
        .map_err(|e| CliError::Solver(e.to_string()))?;
        for digit in 0..digit_count {
            let entry = cache.get(digit, &theta).expect("evaluation fills the cache");
            accuracies[digit][column] = accuracy(&entry.w, &objective.tasks()[digit]);
        }
    }

    let mut csv = String::from("digit,majority_rate");
    for (label, _) in &thetas {
        let _ = write!(csv, ",{label}");
    }
    csv.push('\n');
    for digit in 0..digit_count {
        let _ = write!(csv, "{digit},{}", fmt(majority[digit]));
        for column in 0..thetas.len() {
            let _ = write!(csv, ",{}", fmt(accuracies[digit][column]));
        }
        csv.push('\n');
    }
    write_output(&out_path(cfg, "validate_accuracy.csv"), &csv)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "subcommand: validate");
    let _ = writeln!(summary, "scale: {}", cfg.scale_line());
    let _ = writeln!(
        summary,
        "lower-level solves: fixed {} iterations per digit",
        cfg.validate_k
    );
    for (column, (label, theta)) in thetas.iter().enumerate() {
        let mean: f64 =
            accuracies.iter().map(|row| row[column]).sum::<f64>() / digit_count as f64;
        let _ = writeln!(
            summary,
            "variant {label}: theta = [{:.6}, {:.6}], mean accuracy over digits = {:.4}",
            theta[0], theta[1], mean
        );
    }
    write_output(&out_path(cfg, "summary.txt"), &summary)?;

    let outputs = vec![
        "validate_accuracy.csv".to_string(),
        "summary.txt".to_string(),
    ];
    write_manifest(cfg, "validate", config_path, &data_file_list(cfg), &outputs)
}
