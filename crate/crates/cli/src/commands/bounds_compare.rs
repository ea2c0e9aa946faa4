//! Accuracy-bound comparison on a synthetic l1/l2-regularised least-squares
//! instance: per-iteration true error against a high-accuracy oracle, the
//! worst-case (rate-based) bound, and the computable (subgradient-based)
//! bound.

use std::fmt::Write as _;
use std::path::Path;

use bilevel_core::composite::{apriori_bound, fista_solve_observed, Termination};
use bilevel_core::oracles::ista_solve;
use bilevel_core::problems::{generate_lasso_instance, lasso_problem, HyperPoint};
use bilevel_core::CompositeProblem;
use nalgebra::DVector;

use super::{fmt, out_path, write_output};
use crate::config::ExperimentConfig;
use crate::manifest::write_manifest;
use crate::CliError;

const ROWS: usize = 100;
const COLS: usize = 200;
const ITERATIONS: usize = 500;
const ORACLE_ITERATIONS: usize = 100_000;

pub fn run(cfg: &ExperimentConfig, config_path: &Path) -> Result<(), CliError> {
    super::ensure_out_dir(cfg)?;

    let (a, _, b) = generate_lasso_instance(cfg.solver.seed, ROWS, COLS);
    let point = HyperPoint::new(
        DVector::from_vec(vec![10.0, 10.0]),
        DVector::from_vec(vec![0.0, 0.0]),
        DVector::from_vec(vec![1e8, 1e8]),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let problem = lasso_problem(a, b, &point).map_err(|e| CliError::Config(e.to_string()))?;
    let mu = problem.mu();
    let kappa = problem.condition_number();

    let w_hat = ista_solve(&problem, None, ORACLE_ITERATIONS);
    let init_dist_sq = w_hat.norm_squared(); // the solve below starts at 0

    let mut rows: Vec<(usize, f64, f64, f64)> = Vec::with_capacity(ITERATIONS);
    let termination = Termination::fixed(ITERATIONS).with_audit_certificates(true);
    fista_solve_observed(&problem, None, &termination, |event| {
        rows.push((
            event.iteration,
            (event.w - &w_hat).norm_squared(),
            apriori_bound(kappa, init_dist_sq, event.iteration),
            event
                .certificate
                .expect("audited solves certify every iteration"),
        ));
    })
    .map_err(|e| CliError::Solver(e.to_string()))?;

    let mut csv = String::from("iter,true_err_sq,apriori_bound,aposteriori_bound\n");
    for (iter, true_err, apriori, aposteriori) in &rows {
        let _ = writeln!(
            csv,
            "{iter},{},{},{}",
            fmt(*true_err),
            fmt(*apriori),
            fmt(*aposteriori)
        );
    }
    write_output(&out_path(cfg, "bounds_compare.csv"), &csv)?;

    let dominated = rows
        .iter()
        .all(|(_, true_err, apriori, aposteriori)| true_err <= aposteriori && true_err <= apriori);
    let last = rows.last().expect("at least one iteration");
    let final_tighter = last.3 < last.2;
    let tightness_ratio = last.2 / last.3;

    let mut summary = String::new();
    let _ = writeln!(summary, "subcommand: bounds-compare");
    let _ = writeln!(summary, "scale: {}", cfg.scale_line());
    let _ = writeln!(
        summary,
        "instance: {ROWS}x{COLS} l1/l2 least squares, seed {}, theta = [10, 10]",
        cfg.solver.seed
    );
    let _ = writeln!(summary, "mu: {mu} (exactly 10: {})", mu == 10.0);
    let _ = writeln!(summary, "condition number: {kappa:.6e}");
    let _ = writeln!(
        summary,
        "oracle: {ORACLE_ITERATIONS} proximal-gradient iterations; \
         initial squared distance {:.6e}",
        init_dist_sq
    );
    let _ = writeln!(summary, "iterations compared: {ITERATIONS}");
    let _ = writeln!(
        summary,
        "true error <= computable bound and <= worst-case bound at every iteration: {dominated}"
    );
    let _ = writeln!(
        summary,
        "final iteration: computable bound < worst-case bound: {final_tighter}"
    );
    let _ = writeln!(
        summary,
        "final tightness ratio (worst-case / computable): {tightness_ratio:.6e}"
    );
    write_output(&out_path(cfg, "summary.txt"), &summary)?;

    let outputs = vec!["bounds_compare.csv".to_string(), "summary.txt".to_string()];
    write_manifest(cfg, "bounds-compare", config_path, &[], &outputs)?;

    if mu != 10.0 || !dominated || !final_tighter {
        return Err(CliError::Solver(
            "accuracy-bound audit failed; see summary.txt for details".to_string(),
        ));
    }
    Ok(())
}
