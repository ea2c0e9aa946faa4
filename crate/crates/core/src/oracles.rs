//! Slow, independent reference implementations used by the test suites to
//! cross-check the production code: plain proximal gradient, dense SVD
//! bounds, finite differences, scalar convex search, and a synthetic bilevel
//! task family whose exact solutions and error dynamics are known in closed
//! form. Nothing here is performance-tuned on purpose — these exist to be
//! obviously correct, not fast.

use nalgebra::{DMatrix, DVector};

use crate::composite::CompositeProblem;
use crate::dfo::{AccuracyRequest, CachedSolve, EvalError, TaskSet, TaskSolve};

/// Plain (unaccelerated) proximal-gradient descent with step `1/L`. Linear
/// convergence under strong convexity makes a few hundred thousand iterations
/// an effectively exact reference minimiser for well-conditioned problems.
pub fn ista_solve<P: CompositeProblem + ?Sized>(
    problem: &P,
    w0: Option<&DVector<f64>>,
    iterations: usize,
) -> DVector<f64> {
    let tau = 1.0 / problem.lipschitz();
    let mut w = w0
        .cloned()
        .unwrap_or_else(|| DVector::zeros(problem.dim()));
    for _ in 0..iterations {
        let (_, grad) = problem.smooth_eval(&w);
        let v = &w - tau * grad;
        w = problem.prox(&v, tau);
    }
    w
}

/// Largest squared singular value via a full dense SVD.
pub fn max_singular_value_sq(x: &DMatrix<f64>) -> f64 {
    let sv = x.clone().svd(false, false).singular_values;
    let s = sv.max();
    s * s
}

/// Central finite-difference gradient of a black-box scalar function.
pub fn central_difference_gradient<F>(f: F, at: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    assert!(h > 0.0);
    DVector::from_fn(at.len(), |i, _| {
        let mut plus = at.clone();
        plus[i] += h;
        let mut minus = at.clone();
        minus[i] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    })
}

/// Ternary search for the minimiser of a convex scalar function on
/// `[lo, hi]`. Each iteration shrinks the bracket by a factor 2/3. The
/// attainable precision is limited to roughly `√ε ≈ 1e-8` times the scale of
/// the problem: once `f(m1)` and `f(m2)` tie in floating point the bracket
/// stops contracting around the true minimiser, as with any method that
/// compares function values rather than derivatives.
pub fn minimize_scalar_convex<F>(f: F, mut lo: f64, mut hi: f64, iterations: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    assert!(lo <= hi);
    for _ in 0..iterations {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

/// Separable quadratic `f(w) = Σᵢ ½ λᵢ wᵢ² − bᵢ wᵢ` with no nonsmooth part.
/// Minimiser, curvature constants, and per-iterate behaviour are all known
/// exactly, which makes it the cleanest testbed for iteration-count and
/// exactness claims.
#[derive(Debug, Clone)]
pub struct SmoothQuadratic {
    pub diag: DVector<f64>,
    pub b: DVector<f64>,
}

impl SmoothQuadratic {
    pub fn new(diag: DVector<f64>, b: DVector<f64>) -> Self {
        assert_eq!(diag.len(), b.len());
        assert!(diag.iter().all(|&l| l > 0.0), "need positive curvature");
        SmoothQuadratic { diag, b }
    }

    pub fn minimizer(&self) -> DVector<f64> {
        DVector::from_fn(self.b.len(), |i, _| self.b[i] / self.diag[i])
    }
}

impl CompositeProblem for SmoothQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn mu(&self) -> f64 {
        self.diag.min()
    }

    fn lipschitz(&self) -> f64 {
        self.diag.max()
    }

    fn smooth_eval(&self, w: &DVector<f64>) -> (f64, DVector<f64>) {
        let mut value = 0.0;
        let grad = DVector::from_fn(self.dim(), |i, _| {
            value += 0.5 * self.diag[i] * w[i] * w[i] - self.b[i] * w[i];
            self.diag[i] * w[i] - self.b[i]
        });
        (value, grad)
    }

    fn nonsmooth_value(&self, _w: &DVector<f64>) -> f64 {
        0.0
    }

    fn prox(&self, v: &DVector<f64>, _step: f64) -> DVector<f64> {
        v.clone()
    }
}

/// A one-task bilevel family with everything known in closed form:
///
/// - the exact lower-level solution at θ is `ŵ(θ) = θ`;
/// - an inexact solve after `k` iterations returns `ŵ(θ) + e·u` with
///   `e = e_start · decay^k` along the fixed unit direction `u`;
/// - the reported certificate is exactly `e²`, i.e. the true squared error —
///   a certificate with zero slack;
/// - the task residual block is `w − θ*`, so with exact solves the upper
///   objective is `F(θ) = ‖θ − θ*‖²`, minimised at `θ*` with value 0.
///
/// Picking powers of two for `initial_error` and `decay` keeps every error
/// value exactly representable, so tests can compare certificates bitwise.
#[derive(Debug, Clone)]
pub struct SyntheticBilevel {
    target: DVector<f64>,
    initial_error: f64,
    decay: f64,
    direction: DVector<f64>,
}

impl SyntheticBilevel {
    pub fn new(
        target: DVector<f64>,
        initial_error: f64,
        decay: f64,
        direction: DVector<f64>,
    ) -> Self {
        assert!(initial_error >= 0.0);
        assert!(decay > 0.0 && decay < 1.0);
        assert_eq!(direction.len(), target.len());
        assert!(
            (direction.norm() - 1.0).abs() < 1e-12,
            "direction must be a unit vector"
        );
        SyntheticBilevel {
            target,
            initial_error,
            decay,
            direction,
        }
    }

    /// Variant whose solves are exact from iteration zero.
    pub fn exact(target: DVector<f64>) -> Self {
        let mut direction = DVector::zeros(target.len());
        direction[0] = 1.0;
        SyntheticBilevel {
            target,
            initial_error: 0.0,
            decay: 0.5,
            direction,
        }
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn distance_to_target(&self, theta: &DVector<f64>) -> f64 {
        (theta - &self.target).norm()
    }

    /// Iterations needed to push the error from `e_start` down to `√epsilon`.
    fn iterations_for(&self, e_start: f64, epsilon: f64) -> usize {
        assert!(epsilon > 0.0, "accuracy demand must be positive");
        let mut e = e_start;
        let mut k = 0usize;
        while e * e > epsilon {
            e *= self.decay;
            k += 1;
            assert!(k < 10_000_000, "runaway synthetic solve");
        }
        k
    }
}

impl TaskSet for SyntheticBilevel {
    fn task_count(&self) -> usize {
        1
    }

    fn solve_task(
        &self,
        task: usize,
        theta: &DVector<f64>,
        request: &AccuracyRequest,
        warm: Option<&CachedSolve>,
    ) -> Result<TaskSolve, EvalError> {
        assert_eq!(task, 0);
        let (error, iterations) = match *request {
            AccuracyRequest::Certified { epsilon } => {
                let e_start = match warm.and_then(|entry| entry.certificate) {
                    Some(cert) => cert.sqrt(),
                    None => self.initial_error,
                };
                let k = self.iterations_for(e_start, epsilon);
                (e_start * self.decay.powi(k as i32), k)
            }
            AccuracyRequest::Fixed { iterations } => (
                self.initial_error * self.decay.powi(iterations as i32),
                iterations,
            ),
        };
        let w = theta + &self.direction * error;
        Ok(TaskSolve {
            w,
            certificate: Some(error * error),
            iterations,
        })
    }

    fn residuals_for(&self, task: usize, _theta: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        assert_eq!(task, 0);
        w - &self.target
    }

    fn regularizer(&self, _theta: &DVector<f64>) -> [f64; 2] {
        [0.0, 0.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::{fista_solve, Termination};
    use crate::problems::{lasso_problem, HyperPoint};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn ista_matches_the_scalar_soft_threshold_solution() {
        // ½(w−1)² + ½w² + ½|w| has minimiser w = 0.25.
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = DVector::from_row_slice(&[1.0]);
        let point = HyperPoint::new(
            DVector::from_row_slice(&[1.0, 0.5]),
            DVector::from_row_slice(&[0.0, 0.0]),
            DVector::from_row_slice(&[10.0, 10.0]),
        )
        .unwrap();
        let problem = lasso_problem(a, b, &point).unwrap();
        let w = ista_solve(&problem, None, 10_000);
        assert_relative_eq!(w[0], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn ista_and_fista_agree_on_a_quadratic() {
        let q = SmoothQuadratic::new(
            DVector::from_row_slice(&[1.0, 4.0, 10.0]),
            DVector::from_row_slice(&[1.0, 1.0, 1.0]),
        );
        let truth = q.minimizer();
        let slow = ista_solve(&q, None, 5_000);
        let fast = fista_solve(&q, None, &Termination::target(1e-24)).unwrap();
        assert_relative_eq!(slow, truth, epsilon = 1e-10);
        assert_relative_eq!(fast.w, truth, epsilon = 1e-10);
    }

    #[test]
    fn dense_svd_recovers_a_diagonal_spectrum() {
        let x = DMatrix::from_row_slice(2, 3, &[3.0, 0.0, 0.0, 0.0, 7.0, 0.0]);
        assert_relative_eq!(max_singular_value_sq(&x), 49.0, max_relative = 1e-12);
    }

    #[test]
    fn central_differences_match_an_analytic_gradient() {
        let q = SmoothQuadratic::new(
            DVector::from_row_slice(&[2.0, 5.0]),
            DVector::from_row_slice(&[1.0, -3.0]),
        );
        let at = DVector::from_row_slice(&[0.7, -1.2]);
        let (_, analytic) = q.smooth_eval(&at);
        let numeric = central_difference_gradient(|w| q.smooth_eval(w).0, &at, 1e-5);
        assert_relative_eq!(numeric, analytic, max_relative = 1e-8);
    }

    #[test]
    fn ternary_search_finds_the_soft_threshold_minimiser() {
        // argmin ½(x−2)² + 1.5|x| = 0.5.
        let f = |x: f64| 0.5 * (x - 2.0) * (x - 2.0) + 1.5 * x.abs();
        let x = minimize_scalar_convex(f, -5.0, 5.0, 200);
        // Value-comparison searches bottom out near √ε; don't ask for more.
        assert_relative_eq!(x, 0.5, epsilon = 5e-7);
    }

    #[test]
    fn synthetic_certificates_equal_the_true_squared_error() {
        let family = SyntheticBilevel::new(
            DVector::from_row_slice(&[1.0, 2.0]),
            0.5,
            0.5,
            DVector::from_row_slice(&[1.0, 0.0]),
        );
        let theta = DVector::from_row_slice(&[3.0, -1.0]);
        let solve = family
            .solve_task(0, &theta, &AccuracyRequest::Certified { epsilon: 0.01 }, None)
            .unwrap();
        // 0.5 → 0.25 → 0.125 → 0.0625: three halvings reach 0.0625² ≤ 0.01.
        assert_eq!(solve.iterations, 3);
        let cert = solve.certificate.unwrap();
        assert_eq!(cert, 0.0625 * 0.0625);
        let true_err_sq = (&solve.w - &theta).norm_squared();
        assert_eq!(cert.to_bits(), true_err_sq.to_bits());
    }

    #[test]
    fn synthetic_warm_start_resumes_from_the_cached_error() {
        let family = SyntheticBilevel::new(
            DVector::from_row_slice(&[0.0, 0.0]),
            0.5,
            0.5,
            DVector::from_row_slice(&[0.0, 1.0]),
        );
        let theta = DVector::from_row_slice(&[1.0, 1.0]);
        let warm = CachedSolve {
            w: theta.clone(),
            certificate: Some(0.0625 * 0.0625),
            iterations: 3,
            fixed_k: None,
        };
        let solve = family
            .solve_task(
                0,
                &theta,
                &AccuracyRequest::Certified { epsilon: 1e-6 },
                Some(&warm),
            )
            .unwrap();
        // 0.0625 · 0.5⁶ = 2⁻¹⁰; (2⁻¹⁰)² ≤ 1e−6 while (2⁻⁹)² is not.
        assert_eq!(solve.iterations, 6);
        assert_eq!(solve.certificate.unwrap(), (0.0625 * 0.5f64.powi(6)).powi(2));
    }

    #[test]
    fn synthetic_fixed_mode_decays_from_a_cold_start() {
        let family = SyntheticBilevel::new(
            DVector::from_row_slice(&[0.0]),
            0.5,
            0.5,
            DVector::from_row_slice(&[1.0]),
        );
        let theta = DVector::from_row_slice(&[2.0]);
        let solve = family
            .solve_task(0, &theta, &AccuracyRequest::Fixed { iterations: 3 }, None)
            .unwrap();
        assert_eq!(solve.iterations, 3);
        assert_eq!(solve.certificate.unwrap(), 0.0625 * 0.0625);
        assert_relative_eq!(solve.w[0], 2.0625, epsilon = 0.0);
    }

    #[test]
    fn exact_variant_needs_no_iterations() {
        let family = SyntheticBilevel::exact(DVector::from_row_slice(&[4.0, -2.0]));
        let theta = DVector::from_row_slice(&[1.0, 1.0]);
        let solve = family
            .solve_task(0, &theta, &AccuracyRequest::Certified { epsilon: 1e-30 }, None)
            .unwrap();
        assert_eq!(solve.iterations, 0);
        assert_eq!(solve.certificate, Some(0.0));
        assert_eq!(solve.w, theta);
        // Upper objective at an exact solve is the squared distance to the
        // target.
        let r = family.residuals_for(0, &theta, &solve.w);
        assert_relative_eq!(r.norm_squared(), 9.0 + 9.0, max_relative = 1e-12);
    }
}
