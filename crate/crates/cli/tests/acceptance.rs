//! Release gate: one test per requirement the toolkit commits to, each
//! ending in a single `criterion NN <name>: PASS (elapsed) — detail` line
//! (run with `--nocapture` to see them; `--test-threads=1` keeps the order).
//!
//! Requirements 1–8 are exact-oracle checks and hold deterministically.
//! Requirements 9–11 run the desk-scale experiments on generated data;
//! their quality thresholds are soft: a seed that misses them is retried on
//! the next seed from a fixed three-seed list, every attempt is printed,
//! and only three documented misses fail the gate. Requirement 12 is the
//! full-scale smoke run and is ignored by default because of its runtime.

use std::path::{Path, PathBuf};
use std::time::Instant;

use bilevel_cli::commands;
use bilevel_cli::config::{self, CliOverrides, ExperimentConfig, ScalePreset};
use bilevel_cli::consumed_certificate_audit;
use bilevel_core::composite::{
    apriori_iterations, fista_solve, fista_solve_observed, prox_l1, Termination,
};
use bilevel_core::data::synthetic::{synthetic_digits, write_synthetic_dataset_overlapping};
use bilevel_core::data::{make_binary_task, SplitSpec};
use bilevel_core::dfo::{
    build_model, initial_simplex, run_solver, InterpolationSet, PointData, SolverConfig,
};
use bilevel_core::oracles::{
    central_difference_gradient, ista_solve, SmoothQuadratic, SyntheticBilevel,
};
use bilevel_core::problems::{
    generate_lasso_instance, lasso_problem, logistic_smooth_part, HyperPoint,
};
use bilevel_core::CompositeProblem;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeds tried, in order, by the soft-threshold experiments (9–11).
const RETRY_SEEDS: [u64; 3] = [0, 1, 2];

/// Pool size and partner-swap rate of the generated desk-scale dataset.
const DESK_POOL: usize = 2000;
const DESK_OVERLAP: f64 = 0.1;

fn pass(number: u32, name: &str, started: Instant, limit_secs: f64, detail: &str) {
    let secs = started.elapsed().as_secs_f64();
    assert!(
        secs < limit_secs,
        "criterion {number:02} {name}: FAIL — finished in {secs:.1}s, over the {limit_secs:.0}s budget"
    );
    println!("criterion {number:02} {name}: PASS ({secs:.1}s) — {detail}");
}

fn fail(number: u32, name: &str, detail: &str) -> ! {
    panic!("criterion {number:02} {name}: FAIL — {detail}");
}

// ---------------------------------------------------------------------------
// Small CSV helpers (the emitted files are plain comma-separated, no quoting).

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .unwrap_or_else(|| panic!("{} is empty", path.display()))
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("column {name} missing from header {header:?}"))
}

fn number(row: &[String], index: usize) -> f64 {
    row[index]
        .parse()
        .unwrap_or_else(|e| panic!("bad numeric field {:?}: {e}", row[index]))
}

// ---------------------------------------------------------------------------
// Experiment plumbing shared by criteria 9–11 and 12.

fn load_config(path: &Path, scale: ScalePreset) -> ExperimentConfig {
    let overrides = CliOverrides {
        scale: Some(scale),
        ..CliOverrides::default()
    };
    config::load(path, &overrides).unwrap_or_else(|e| panic!("configuration rejected: {e}"))
}

/// Generate the seed's image pool and write a config document pointing at it.
fn desk_setup(dir: &Path, seed: u64, out_name: &str, extra: &str) -> PathBuf {
    let (images, labels) = write_synthetic_dataset_overlapping(dir, DESK_POOL, seed, DESK_OVERLAP)
        .expect("synthetic pool writes");
    let text = format!(
        "images_path = \"{}\"\nlabels_path = \"{}\"\nout_dir = \"{}\"\nseed = {seed}\n{extra}",
        images.display(),
        labels.display(),
        dir.join(out_name).display()
    );
    let path = dir.join(format!("{out_name}.toml"));
    std::fs::write(&path, text).expect("config writes");
    path
}

/// Run `tune` on one seed and return per-variant `(final_F, cum_iters)`.
fn desk_tune(dir: &Path, seed: u64, fixed_ks: &str) -> Vec<(String, f64, f64)> {
    let out_name = format!("tune-seed{seed}");
    let config_path = desk_setup(dir, seed, &out_name, &format!("fixed_ks = {fixed_ks}\n"));
    let cfg = load_config(&config_path, ScalePreset::Desk);
    commands::tune::run(&cfg, &config_path).unwrap_or_else(|e| panic!("tune failed: {e}"));
    let (header, rows) = read_csv(&dir.join(&out_name).join("tune_summary.csv"));
    let (variant, final_f, iters) = (
        column(&header, "variant"),
        column(&header, "final_F"),
        column(&header, "cum_fista_iters"),
    );
    rows.iter()
        .map(|r| (r[variant].clone(), number(r, final_f), number(r, iters)))
        .collect()
}

fn variant_value(rows: &[(String, f64, f64)], name: &str) -> (f64, f64) {
    rows.iter()
        .find(|(v, _, _)| v == name)
        .map(|(_, f, it)| (*f, *it))
        .unwrap_or_else(|| panic!("variant {name} missing from tune summary"))
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_bound_validity_and_tightness() {
    const NAME: &str = "bound-validity";
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bounds.toml");
    std::fs::write(
        &config_path,
        format!("out_dir = \"{}\"\nseed = 0\n", dir.path().join("out").display()),
    )
    .unwrap();
    let cfg = load_config(&config_path, ScalePreset::Desk);
    // The command itself audits domination and tightness and fails otherwise.
    commands::bounds_compare::run(&cfg, &config_path)
        .unwrap_or_else(|e| fail(1, NAME, &format!("command failed its own audit: {e}")));

    // Re-verify from the emitted CSV rather than trusting the exit status.
    let (header, rows) = read_csv(&dir.path().join("out").join("bounds_compare.csv"));
    let (true_col, apriori_col, apost_col) = (
        column(&header, "true_err_sq"),
        column(&header, "apriori_bound"),
        column(&header, "aposteriori_bound"),
    );
    if rows.len() != 500 {
        fail(1, NAME, &format!("expected 500 iterations, found {}", rows.len()));
    }
    for (i, row) in rows.iter().enumerate() {
        let (truth, apriori, apost) = (
            number(row, true_col),
            number(row, apriori_col),
            number(row, apost_col),
        );
        if truth > apost || truth > apriori {
            fail(
                1,
                NAME,
                &format!("row {i}: true {truth:e} exceeds a bound (worst-case {apriori:e}, computable {apost:e})"),
            );
        }
    }
    let last = rows.last().unwrap();
    let ratio = number(last, apriori_col) / number(last, apost_col);
    if ratio <= 1.0 {
        fail(1, NAME, &format!("final computable bound is not tighter (ratio {ratio:e})"));
    }
    let summary = std::fs::read_to_string(dir.path().join("out").join("summary.txt")).unwrap();
    if !summary.contains("exactly 10: true") {
        fail(1, NAME, "summary does not confirm the exact strong-convexity constant");
    }
    pass(
        1,
        NAME,
        started,
        30.0,
        &format!("both bounds dominate the oracle error at all 500 iterations; final worst-case/computable ratio {ratio:.2e}"),
    );
}

#[test]
fn criterion_02_certificate_soundness_sweep() {
    const NAME: &str = "certificate-soundness";
    let started = Instant::now();
    let mut checked = 0u32;
    let mut tightest = f64::INFINITY;
    for instance in 0..50u64 {
        let seed = 1000 + instance;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = rng.gen_range(5..=25);
        let cols = rng.gen_range(1..=20);
        let (a, _, b) = generate_lasso_instance(seed, rows, cols);
        let point = HyperPoint::new(
            DVector::from_vec(vec![rng.gen_range(1.0..3.0), rng.gen_range(0.0..2.0)]),
            DVector::from_vec(vec![1e-6, 0.0]),
            DVector::from_vec(vec![1e8, 1e8]),
        )
        .unwrap();
        let problem = lasso_problem(a, b, &point).unwrap();
        let w_hat = ista_solve(&problem, None, 60_000);
        // The reference solve is exact only to machine precision, so squared
        // distances below this floor are measurement noise on both sides of
        // the comparison; any genuine certificate defect sits far above it.
        let resolution = (1e-12 * (1.0 + w_hat.norm())).powi(2);
        let termination = Termination::fixed(300).with_audit_certificates(true);
        fista_solve_observed(&problem, None, &termination, |event| {
            if event.iteration % 10 != 0 {
                return;
            }
            let certificate = event.certificate.expect("audited solves certify");
            let true_sq = (event.w - &w_hat).norm_squared();
            if true_sq > certificate + resolution {
                fail(
                    2,
                    NAME,
                    &format!("instance {instance} iteration {}: true {true_sq:e} > certificate {certificate:e}", event.iteration),
                );
            }
            if true_sq > resolution {
                tightest = tightest.min(certificate / true_sq);
            }
            checked += 1;
        })
        .unwrap_or_else(|e| fail(2, NAME, &format!("instance {instance} solve failed: {e}")));
    }
    pass(
        2,
        NAME,
        started,
        60.0,
        &format!("{checked} certificates across 50 instances all dominate the oracle-measured error (tightest over-estimate ×{tightest:.2} in the resolvable regime)"),
    );
}

#[test]
fn criterion_03_fista_exactness_on_quadratics() {
    const NAME: &str = "target-accuracy-exactness";
    let started = Instant::now();
    let mut worst_error = 0.0f64;
    let mut worst_iteration_share = 0.0f64;
    for t in 0..20u64 {
        let dim = 2 + (t as usize % 9);
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + t);
        let diag =
            DVector::from_fn(dim, |i, _| 1.0 + 99.0 * i as f64 / (dim - 1) as f64);
        let b = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
        let quadratic = SmoothQuadratic::new(diag, b);
        let w_hat = quadratic.minimizer();
        let solution = fista_solve(&quadratic, None, &Termination::target(1e-14))
            .unwrap_or_else(|e| fail(3, NAME, &format!("instance {t} failed: {e}")));
        let error = (&solution.w - &w_hat).norm();
        if error > 1e-6 {
            fail(3, NAME, &format!("instance {t}: {error:e} from the closed form"));
        }
        let kappa = quadratic.lipschitz() / quadratic.mu();
        let cap = apriori_iterations(kappa, w_hat.norm_squared(), 1e-14).unwrap();
        if solution.iterations > cap {
            fail(
                3,
                NAME,
                &format!("instance {t}: {} iterations exceed the worst-case count {cap}", solution.iterations),
            );
        }
        worst_error = worst_error.max(error);
        worst_iteration_share = worst_iteration_share.max(solution.iterations as f64 / cap as f64);
    }
    pass(
        3,
        NAME,
        started,
        10.0,
        &format!("20 quadratics (condition number 100): worst distance {worst_error:.1e}, iteration counts ≤ {:.0}% of the worst-case bound", 100.0 * worst_iteration_share),
    );
}

#[test]
fn criterion_04_prox_oracle() {
    const NAME: &str = "soft-threshold-oracle";
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4000);
    let mut perturbations = 0u32;
    let mut worst_margin = f64::INFINITY;
    for case in 0..1000u32 {
        let dim = rng.gen_range(1..=8);
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0));
        let threshold = if case % 50 == 0 { 0.0 } else { rng.gen_range(0.0..1.5) };
        let p = prox_l1(&v, threshold);
        let analytic = v.map(|x| x.signum() * (x.abs() - threshold).max(0.0));
        if (&p - &analytic).amax() > 1e-15 {
            fail(4, NAME, &format!("case {case}: disagrees with the analytic formula"));
        }
        let objective = |u: &DVector<f64>| {
            threshold * u.iter().map(|x| x.abs()).sum::<f64>() + 0.5 * (u - &v).norm_squared()
        };
        let at_p = objective(&p);
        for i in 0..dim {
            for step in [-1e-3, 1e-3] {
                let mut u = p.clone();
                u[i] += step;
                let margin = objective(&u) - at_p;
                if margin < -1e-12 {
                    fail(
                        4,
                        NAME,
                        &format!("case {case}: perturbing coordinate {i} by {step:+e} improves the objective by {margin:e}"),
                    );
                }
                worst_margin = worst_margin.min(margin);
                perturbations += 1;
            }
        }
    }
    pass(
        4,
        NAME,
        started,
        5.0,
        &format!("1000 cases match the analytic formula to 1e-15; none of {perturbations} grid perturbations improves the objective (worst margin {worst_margin:+.1e})"),
    );
}

#[test]
fn criterion_05_logistic_gradient_checks() {
    const NAME: &str = "gradient-checks";
    let started = Instant::now();
    let (images, labels) = synthetic_digits(600, 77);
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    let mut pairs = 0u32;
    let mut worst = 0.0f64;
    for digit in 0..10u8 {
        let spec = SplitSpec {
            train_size: 40,
            test_size: 20,
            validation_train_size: 40,
            validation_test_size: 20,
            seed: 77,
            downsample_factor: 2,
            normalize: digit % 2 == 0,
        };
        let task = make_binary_task(&images, &labels, digit, &spec).unwrap();
        for k in 0..10 {
            let theta1 = -2.0 + (k % 5) as f64;
            let smooth = logistic_smooth_part(&task, theta1);
            let w = DVector::from_fn(task.feature_dim(), |_, _| rng.gen_range(-0.01..0.01));
            let (_, analytic) = smooth.eval(&w);
            let numeric = central_difference_gradient(
                |u| logistic_smooth_part(&task, theta1).eval(u).0,
                &w,
                1e-6,
            );
            let relative = (&analytic - &numeric).norm() / analytic.norm().max(1e-12);
            if relative > 1e-5 {
                fail(
                    5,
                    NAME,
                    &format!("digit {digit}, draw {k} (l2 exponent {theta1}): relative error {relative:e}"),
                );
            }
            worst = worst.max(relative);
            pairs += 1;
        }
    }
    pass(
        5,
        NAME,
        started,
        10.0,
        &format!("{pairs} task/weight pairs: worst relative gradient error {worst:.1e}"),
    );
}

#[test]
fn criterion_06_model_interpolation_audit() {
    const NAME: &str = "model-exactness";
    let started = Instant::now();
    if !cfg!(debug_assertions) {
        fail(6, NAME, "test profile compiled without debug assertions; the in-run audit is inactive");
    }

    // Reproduce the interpolation property by hand on a nonlinear residual map.
    let theta0 = DVector::from_vec(vec![1.0, 1.0]);
    let lo = DVector::from_vec(vec![-8.0, -8.0]);
    let hi = DVector::from_vec(vec![8.0, 8.0]);
    let points = initial_simplex(&theta0, 0.1, &lo, &hi).unwrap();
    let residuals_at = |p: &DVector<f64>| {
        DVector::from_vec(vec![
            p[0] * p[0] - p[1],
            p[0] * p[1] + 1.0,
            (0.3 * p[0]).sin(),
        ])
    };
    let data: Vec<PointData> = points
        .iter()
        .map(|p| {
            let residuals = residuals_at(p);
            PointData {
                objective: residuals.norm_squared(),
                residuals,
                certificates: vec![None],
            }
        })
        .collect();
    let set = InterpolationSet::new(points.clone(), data);
    let model = build_model(&set).unwrap_or_else(|e| fail(6, NAME, &format!("model build failed: {e}")));
    let mut worst = 0.0f64;
    for point in &points {
        let predicted = model.predict_residuals(&(point - model.base()));
        let truth = residuals_at(point);
        let relative = (&predicted - &truth).norm() / (1.0 + truth.norm());
        if relative > 1e-9 {
            fail(6, NAME, &format!("model misses an interpolation point by {relative:e}"));
        }
        worst = worst.max(relative);
    }

    // A full solver run in this build re-checks the property at every model
    // build and panics on violation.
    let problem = SyntheticBilevel::new(
        DVector::from_vec(vec![0.2, 0.4]),
        0.5,
        0.5,
        DVector::from_vec(vec![0.6, 0.8]),
    );
    let config = SolverConfig {
        eval_budget: 30,
        ..SolverConfig::default()
    };
    let outcome = run_solver(&problem, &config)
        .unwrap_or_else(|e| fail(6, NAME, &format!("audited run failed: {e}")));
    pass(
        6,
        NAME,
        started,
        30.0,
        &format!("debug-mode audit active through a {}-evaluation run; manual reproduction off by {worst:.1e} at worst", outcome.evaluations),
    );
}

#[test]
fn criterion_07_dynamic_accuracy_contract() {
    const NAME: &str = "accuracy-contract";
    let started = Instant::now();
    let problem = SyntheticBilevel::new(
        DVector::from_vec(vec![0.3, -0.4]),
        0.9,
        0.6,
        DVector::from_vec(vec![0.6, 0.8]),
    );
    let config = SolverConfig {
        eval_budget: 40,
        ..SolverConfig::default()
    };
    let outcome = run_solver(&problem, &config)
        .unwrap_or_else(|e| fail(7, NAME, &format!("run failed: {e}")));
    if outcome.consumed.is_empty() {
        fail(7, NAME, "run consumed no evaluations");
    }
    let mut audited = 0u32;
    for (index, eval) in outcome.consumed.iter().enumerate() {
        let demand = eval
            .demand
            .unwrap_or_else(|| fail(7, NAME, &format!("consumed evaluation {index} carries no accuracy demand")));
        let allowed = config.c * eval.radius * eval.radius;
        for certificate in &eval.certificates {
            // This problem's certificate is its true squared error exactly,
            // so the check below audits the real contract, not a proxy.
            let true_error_sq =
                certificate.unwrap_or_else(|| fail(7, NAME, &format!("evaluation {index} lacks a certificate")));
            if true_error_sq > demand {
                fail(7, NAME, &format!("evaluation {index}: error {true_error_sq:e} exceeds its demand {demand:e}"));
            }
            if true_error_sq.sqrt() > allowed * (1.0 + 1e-12) {
                fail(
                    7,
                    NAME,
                    &format!("evaluation {index}: true error {:e} exceeds c·Δ² = {allowed:e}", true_error_sq.sqrt()),
                );
            }
            audited += 1;
        }
    }
    if !consumed_certificate_audit(&outcome.consumed) {
        fail(7, NAME, "the production-side audit disagrees");
    }
    pass(
        7,
        NAME,
        started,
        30.0,
        &format!("{audited} consumed evaluations all satisfy true error ≤ c·Δ² (closed-form errors, zero-slack certificates)"),
    );
}

#[test]
fn criterion_08_synthetic_bilevel_convergence() {
    const NAME: &str = "synthetic-convergence";
    let started = Instant::now();
    let problem = SyntheticBilevel::exact(DVector::from_vec(vec![0.5, -0.25]));
    let config = SolverConfig {
        eval_budget: 40,
        ..SolverConfig::default()
    };
    let outcome = run_solver(&problem, &config)
        .unwrap_or_else(|e| fail(8, NAME, &format!("run failed: {e}")));
    let distance = problem.distance_to_target(&outcome.best_theta);
    if distance > 1e-3 {
        fail(
            8,
            NAME,
            &format!("stopped {distance:e} from the optimum after {} evaluations", outcome.evaluations),
        );
    }
    if outcome.evaluations > 40 {
        fail(8, NAME, &format!("consumed {} evaluations, over the 40 budget", outcome.evaluations));
    }
    pass(
        8,
        NAME,
        started,
        10.0,
        &format!("distance to the optimum {distance:.1e} after {} evaluations", outcome.evaluations),
    );
}

#[test]
fn criterion_09_desk_accuracy_policy_comparison() {
    const NAME: &str = "desk-policy-comparison";
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut misses: Vec<String> = Vec::new();
    for (attempt, &seed) in RETRY_SEEDS.iter().enumerate() {
        let rows = desk_tune(dir.path(), seed, "[20, 2000]");
        let (f_dyn, it_dyn) = variant_value(&rows, "dynamic");
        let (f_20, _) = variant_value(&rows, "fixed_k20");
        let (f_2000, it_2000) = variant_value(&rows, "fixed_k2000");
        let relative = (f_dyn - f_2000).abs() / f_2000.abs();
        let iteration_share = it_dyn / it_2000;
        let gap_low = (f_20 - f_2000).abs();
        let gap_dyn = (f_dyn - f_2000).abs();
        let verdicts = [
            relative <= 0.01,
            iteration_share < 0.6,
            gap_low > gap_dyn,
        ];
        let line = format!(
            "attempt {}/3 (seed {seed}): final F {relative:.4} off high-accuracy (need ≤ 0.01), \
             {:.4} of its inner iterations (need < 0.6), low-accuracy gap {gap_low:.4} vs dynamic gap {gap_dyn:.4} (need >)",
            attempt + 1,
            iteration_share
        );
        println!("criterion 09 {line}");
        if verdicts.iter().all(|&v| v) {
            pass(
                9,
                NAME,
                started,
                600.0,
                &format!(
                    "seed {seed} (attempt {}/3): dynamic matches the high-accuracy final objective to {:.2}% using {:.1}% of its inner iterations, while the low-accuracy policy lands {:.1}× further away",
                    attempt + 1,
                    100.0 * relative,
                    100.0 * iteration_share,
                    gap_low / gap_dyn.max(f64::MIN_POSITIVE)
                ),
            );
            return;
        }
        misses.push(line);
    }
    fail(
        9,
        NAME,
        &format!("all three seeds missed the soft thresholds:\n{}", misses.join("\n")),
    );
}

#[test]
fn criterion_10_desk_start_robustness_sweep() {
    const NAME: &str = "desk-start-robustness";
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut held = 0u32;
    let mut recorded: Vec<String> = Vec::new();
    for &seed in &RETRY_SEEDS {
        let out_name = format!("sweep-seed{seed}");
        let config_path = desk_setup(dir.path(), seed, &out_name, "fixed_ks = [20]\n");
        let cfg = load_config(&config_path, ScalePreset::Desk);
        commands::sweep::run(&cfg, &config_path)
            .unwrap_or_else(|e| fail(10, NAME, &format!("sweep failed on seed {seed}: {e}")));

        let (header, rows) = read_csv(&dir.path().join(&out_name).join("sweep_finals.csv"));
        let (variant, start, t1, t2) = (
            column(&header, "variant"),
            column(&header, "theta2_start"),
            column(&header, "final_theta1"),
            column(&header, "final_theta2"),
        );
        for name in ["dynamic", "fixed_k20"] {
            let finals: Vec<&Vec<String>> = rows.iter().filter(|r| r[variant] == name).collect();
            if finals.len() != 7 {
                fail(10, NAME, &format!("seed {seed}: {name} has {} starts, expected 7", finals.len()));
            }
            for row in finals {
                let (a, b) = (number(row, t1), number(row, t2));
                if !(-8.0..=8.0).contains(&a) || !(-8.0..=8.0).contains(&b) {
                    fail(
                        10,
                        NAME,
                        &format!("seed {seed}: {name} from start {} finished outside the box at ({a}, {b})", row[start]),
                    );
                }
            }
        }

        let (header, rows) = read_csv(&dir.path().join(&out_name).join("sweep_spread.csv"));
        let (variant, s1, s2) = (
            column(&header, "variant"),
            column(&header, "spread_theta1"),
            column(&header, "spread_theta2"),
        );
        let spread = |name: &str| -> (f64, f64) {
            let row = rows
                .iter()
                .find(|r| r[variant] == name)
                .unwrap_or_else(|| panic!("spread table misses {name}"));
            (number(row, s1), number(row, s2))
        };
        let dynamic = spread("dynamic");
        let fixed = spread("fixed_k20");
        let holds = dynamic.0 <= fixed.0 && dynamic.1 <= fixed.1;
        held += holds as u32;
        let line = format!(
            "seed {seed}: spread(dynamic) = ({:.2}, {:.2}), spread(fixed_k20) = ({:.2}, {:.2}) → dynamic ≤ fixed componentwise: {}",
            dynamic.0, dynamic.1, fixed.0, fixed.1, if holds { "yes" } else { "no" }
        );
        println!("criterion 10 {line}");
        recorded.push(line);
    }
    pass(
        10,
        NAME,
        started,
        3600.0,
        &format!(
            "3 seeds × 7 starts × 2 policies completed inside the box; spreads recorded above (the dynamic-no-wider expectation held on {held}/3 seeds — recorded, not gated, at this scale)"
        ),
    );
}

#[test]
fn criterion_11_desk_validation_sanity() {
    const NAME: &str = "desk-validation";
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut misses: Vec<String> = Vec::new();
    for (attempt, &seed) in RETRY_SEEDS.iter().enumerate() {
        desk_tune(dir.path(), seed, "[20]");
        let tune_summary = dir.path().join(format!("tune-seed{seed}")).join("tune_summary.csv");
        let out_name = format!("validate-seed{seed}");
        let config_path = desk_setup(
            dir.path(),
            seed,
            &out_name,
            &format!("thetas_from = \"{}\"\n", tune_summary.display()),
        );
        let cfg = load_config(&config_path, ScalePreset::Desk);
        commands::validate::run(&cfg, &config_path)
            .unwrap_or_else(|e| fail(11, NAME, &format!("validate failed on seed {seed}: {e}")));

        let (header, rows) = read_csv(&dir.path().join(&out_name).join("validate_accuracy.csv"));
        if rows.len() != 10 {
            fail(11, NAME, &format!("seed {seed}: expected 10 digit rows, found {}", rows.len()));
        }
        let majority = column(&header, "majority_rate");
        let variants: Vec<(String, usize)> = header
            .iter()
            .enumerate()
            .filter(|(_, name)| *name != "digit" && *name != "majority_rate")
            .map(|(i, name)| (name.clone(), i))
            .collect();
        // The accuracy band is a hard requirement on every attempted seed.
        for row in &rows {
            let floor = number(row, majority) - 0.02;
            for (name, i) in &variants {
                let accuracy = number(row, *i);
                if !(floor..=1.0).contains(&accuracy) {
                    fail(
                        11,
                        NAME,
                        &format!("seed {seed}: digit {} under {name} scores {accuracy:.4}, outside [{floor:.4}, 1]", row[0]),
                    );
                }
            }
        }
        let mean = |name: &str| -> f64 {
            let i = variants
                .iter()
                .find(|(v, _)| v == name)
                .unwrap_or_else(|| panic!("variant {name} missing from the accuracy matrix"))
                .1;
            rows.iter().map(|r| number(r, i)).sum::<f64>() / rows.len() as f64
        };
        let mean_dynamic = mean("dynamic");
        let mean_fixed = mean("fixed_k20");
        let line = format!(
            "attempt {}/3 (seed {seed}): all 10×{} accuracies within [majority − 0.02, 1]; mean(dynamic) = {mean_dynamic:.4} vs mean(fixed_k20) = {mean_fixed:.4}",
            attempt + 1,
            variants.len()
        );
        println!("criterion 11 {line}");
        if mean_dynamic >= mean_fixed {
            pass(
                11,
                NAME,
                started,
                1200.0,
                &format!(
                    "seed {seed} (attempt {}/3): every accuracy within its band and mean(dynamic) {mean_dynamic:.4} ≥ mean(fixed_k20) {mean_fixed:.4}",
                    attempt + 1
                ),
            );
            return;
        }
        misses.push(line);
    }
    fail(
        11,
        NAME,
        &format!("bands held but the dynamic policy never matched the fixed policy's mean accuracy:\n{}", misses.join("\n")),
    );
}

#[test]
#[ignore = "full-scale smoke run (hours on one core); run explicitly via --ignored"]
fn criterion_12_full_scale_smoke() {
    const NAME: &str = "full-scale-smoke";
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) =
        write_synthetic_dataset_overlapping(dir.path(), 13_000, 0, DESK_OVERLAP).unwrap();
    let out = dir.path().join("out");
    let config_path = dir.path().join("full.toml");
    std::fs::write(
        &config_path,
        format!(
            "images_path = \"{}\"\nlabels_path = \"{}\"\nout_dir = \"{}\"\nseed = 0\n",
            images.display(),
            labels.display(),
            out.display()
        ),
    )
    .unwrap();
    let cfg = load_config(&config_path, ScalePreset::Paper);
    commands::tune::run(&cfg, &config_path)
        .unwrap_or_else(|e| fail(12, NAME, &format!("full-scale tune failed: {e}")));
    for file in [
        "runlog_dynamic.csv",
        "runlog_fixed_k20.csv",
        "runlog_fixed_k200.csv",
        "runlog_fixed_k2000.csv",
        "tune_summary.csv",
        "summary.txt",
        "manifest.json",
    ] {
        let path = out.join(file);
        let size = std::fs::metadata(&path)
            .unwrap_or_else(|e| fail(12, NAME, &format!("missing output {file}: {e}")))
            .len();
        if size == 0 {
            fail(12, NAME, &format!("output {file} is empty"));
        }
    }
    pass(
        12,
        NAME,
        started,
        f64::INFINITY,
        "full-size configuration completed and emitted every log",
    );
}
