//! Hyperparameter tuning under each accuracy policy: one run log per variant
//! plus a combined summary table.

use std::fmt::Write as _;
use std::path::Path;

use bilevel_core::dfo::{run_solver, ElasticNetObjective, ModeKind, RunLog, RunOutcome};

use super::{
    build_objective, consumed_certificate_audit, data_file_list, fmt, out_path, stop_reason_name,
    variant_list, write_output,
};
use crate::config::ExperimentConfig;
use crate::manifest::write_manifest;
use crate::CliError;

pub(crate) const SUMMARY_HEADER: &str =
    "variant,final_theta1,final_theta2,final_F,cum_fista_iters,evaluations,stop_reason,certificate_audit";

pub(crate) struct VariantRow {
    pub name: String,
    pub final_theta: [f64; 2],
    pub final_f: f64,
    pub cum_iters: usize,
    pub evaluations: usize,
    pub stop: &'static str,
    pub audit: &'static str,
}

impl VariantRow {
    pub(crate) fn from_outcome(name: &str, certified: bool, outcome: &RunOutcome) -> Self {
        VariantRow {
            name: name.to_string(),
            final_theta: [outcome.best_theta[0], outcome.best_theta[1]],
            final_f: outcome.best_objective,
            cum_iters: outcome.inner_iterations,
            evaluations: outcome.evaluations,
            stop: stop_reason_name(outcome.stop),
            audit: if certified {
                if consumed_certificate_audit(&outcome.consumed) {
                    "pass"
                } else {
                    "FAIL"
                }
            } else {
                "n/a"
            },
        }
    }

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.name,
            fmt(self.final_theta[0]),
            fmt(self.final_theta[1]),
            fmt(self.final_f),
            self.cum_iters,
            self.evaluations,
            self.stop,
            self.audit
        )
    }
}

fn summary_csv(rows: &[VariantRow]) -> String {
    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.csv_line());
        text.push('\n');
    }
    text
}

fn runlog_csv(log: &RunLog) -> Result<String, CliError> {
    let mut buf = Vec::new();
    log.write_csv(&mut buf)
        .map_err(|e| CliError::Solver(format!("run-log serialisation: {e}")))?;
    String::from_utf8(buf).map_err(|e| CliError::Solver(format!("run-log encoding: {e}")))
}

fn summary_text(cfg: &ExperimentConfig, rows: &[VariantRow], failure: Option<&str>) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "subcommand: tune");
    let _ = writeln!(text, "scale: {}", cfg.scale_line());
    let _ = writeln!(
        text,
        "start: theta0 = [{}, {}]",
        cfg.solver.theta0[0], cfg.solver.theta0[1]
    );
    for row in rows {
        let _ = writeln!(
            text,
            "variant {}: final theta = [{:.6}, {:.6}], final F = {:.6e}, \
             cumulative inner iterations = {}, evaluations = {}, stop = {}, \
             certificate audit = {}",
            row.name,
            row.final_theta[0],
            row.final_theta[1],
            row.final_f,
            row.cum_iters,
            row.evaluations,
            row.stop,
            row.audit
        );
    }
    if let Some(msg) = failure {
        let _ = writeln!(text, "aborted: {msg}");
    }
    text
}

pub fn run(cfg: &ExperimentConfig, config_path: &Path) -> Result<(), CliError> {
    super::ensure_out_dir(cfg)?;
    let objective = build_objective(cfg)?;
    run_with_objective(cfg, &objective, config_path)
}

/// The tuning loop proper, shared with tests that construct the objective
/// themselves.
pub(crate) fn run_with_objective(
    cfg: &ExperimentConfig,
    objective: &ElasticNetObjective,
    config_path: &Path,
) -> Result<(), CliError> {
    let mut rows: Vec<VariantRow> = Vec::new();
    let mut outputs: Vec<String> = Vec::new();

    for (name, solver_cfg) in variant_list(cfg) {
        let log_name = format!("runlog_{name}.csv");
        match run_solver(objective, &solver_cfg) {
            Ok(outcome) => {
                write_output(&out_path(cfg, &log_name), &runlog_csv(&outcome.log)?)?;
                outputs.push(log_name);
                rows.push(VariantRow::from_outcome(
                    &name,
                    solver_cfg.mode == ModeKind::Dynamic,
                    &outcome,
                ));
            }
            Err(failure) => {
                // Flush everything we have before reporting the failure.
                write_output(&out_path(cfg, &log_name), &runlog_csv(&failure.log)?)?;
                outputs.push(log_name);
                write_output(&out_path(cfg, "tune_summary.csv"), &summary_csv(&rows))?;
                outputs.push("tune_summary.csv".to_string());
                let msg = format!("variant {name}: {}", failure.error);
                write_output(
                    &out_path(cfg, "summary.txt"),
                    &summary_text(cfg, &rows, Some(&msg)),
                )?;
                outputs.push("summary.txt".to_string());
                write_manifest(cfg, "tune", config_path, &data_file_list(cfg), &outputs)?;
                return Err(CliError::Solver(msg));
            }
        }
    }

    write_output(&out_path(cfg, "tune_summary.csv"), &summary_csv(&rows))?;
    outputs.push("tune_summary.csv".to_string());
    write_output(&out_path(cfg, "summary.txt"), &summary_text(cfg, &rows, None))?;
    outputs.push("summary.txt".to_string());
    write_manifest(cfg, "tune", config_path, &data_file_list(cfg), &outputs)?;

    if rows.iter().any(|r| r.audit == "FAIL") {
        return Err(CliError::Solver(
            "dynamic-accuracy certificate audit failed; see tune_summary.csv".to_string(),
        ));
    }
    Ok(())
}
