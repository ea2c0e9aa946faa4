//! Accelerated proximal gradient descent for strongly convex composite
//! objectives, with computable accuracy certificates.
//!
//! The objective has the form `Φ(w) = f(w) + g(w)` where `f` is `μ`-strongly
//! convex with `L`-Lipschitz gradient and `g` is convex with a cheap proximal
//! operator. The solver runs the strongly convex momentum recursion
//!
//! ```text
//! t_{k+1} = (1 - q t_k² + sqrt((1 - q t_k²)² + 4 t_k²)) / 2
//! β_{k+1} = (t_k - 1)(1 - t_{k+1} q) / (t_{k+1} (1 - q))
//! z^{k+1} = w^k + β_{k+1} (w^k - w^{k-1})
//! w^{k+1} = prox_{τ g}(z^{k+1} - τ ∇f(z^{k+1}))
//! ```
//!
//! with `τ = 1/L`, `q = τ μ`, `t_0 = 0` and `w^{-1} = w^0`. After each
//! iteration the vector
//!
//! ```text
//! d = ∇f(w^{k+1}) - ∇f(z^{k+1}) + (z^{k+1} - w^{k+1}) / τ
//! ```
//!
//! is a subgradient of `Φ` at `w^{k+1}`, so `‖d‖² / μ²` bounds the squared
//! distance to the minimizer. That bound is what the rest of the crate calls
//! a certificate: termination on `certificate ≤ ε` guarantees
//! `‖w - ŵ‖² ≤ ε` without knowing `ŵ`.

use nalgebra::DVector;
use thiserror::Error;

/// Strongly convex composite objective `f + g` exposed through the pieces the
/// solver needs: smooth value/gradient, nonsmooth value, prox, and the
/// constants `μ` (strong convexity of `f`) and `L` (gradient Lipschitz bound,
/// which fixes the step size `τ = 1/L`).
pub trait CompositeProblem {
    fn dim(&self) -> usize;
    fn mu(&self) -> f64;
    fn lipschitz(&self) -> f64;

    /// Value and gradient of the smooth part at `w`.
    fn smooth_eval(&self, w: &DVector<f64>) -> (f64, DVector<f64>);

    /// Gradient of the smooth part alone. Override when the gradient is
    /// cheaper without the value.
    fn smooth_grad(&self, w: &DVector<f64>) -> DVector<f64> {
        self.smooth_eval(w).1
    }

    /// Value of the nonsmooth part at `w`.
    fn nonsmooth_value(&self, w: &DVector<f64>) -> f64;

    /// `prox_{step · g}(v)`.
    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64>;

    fn objective(&self, w: &DVector<f64>) -> f64 {
        self.smooth_eval(w).0 + self.nonsmooth_value(w)
    }

    fn condition_number(&self) -> f64 {
        self.lipschitz() / self.mu()
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("momentum recursion undefined for q = {q} (requires 0 <= q < 1)")]
    InvalidConditioning { q: f64 },
    #[error("invalid problem constants mu = {mu}, lipschitz = {lipschitz}")]
    InvalidConstants { mu: f64, lipschitz: f64 },
    #[error(
        "accuracy target {target:e} not certified within {iterations} iterations \
         (best certificate {best_certificate:e})"
    )]
    AccuracyUnreachable {
        target: f64,
        iterations: usize,
        best_certificate: f64,
    },
    #[error("non-finite iterate produced at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("linear rate undefined for condition number {kappa} (requires kappa > 1)")]
    DegenerateRate { kappa: f64 },
}

/// Momentum recursion state carried between iterations.
#[derive(Debug, Clone)]
pub struct MomentumState {
    pub t: f64,
    pub q: f64,
    pub tau: f64,
    pub w_prev: DVector<f64>,
    pub w_curr: DVector<f64>,
}

impl MomentumState {
    /// Fresh state at `w0` (the recursion treats `w^{-1} = w^0`, so the first
    /// extrapolation returns `w0` itself).
    pub fn new(w0: DVector<f64>, tau: f64, q: f64) -> Self {
        MomentumState {
            t: 0.0,
            q,
            tau,
            w_prev: w0.clone(),
            w_curr: w0,
        }
    }

    /// Advance `t` and produce the extrapolated point
    /// `z = w_curr + β (w_curr - w_prev)`.
    pub fn extrapolate(&mut self) -> Result<DVector<f64>, SolveError> {
        let (t_next, beta) = momentum_step(self.t, self.q)?;
        self.t = t_next;
        let mut z = self.w_curr.clone();
        z.axpy(beta, &self.w_curr, 1.0);
        z.axpy(-beta, &self.w_prev, 1.0);
        Ok(z)
    }

    /// Record the new iterate after the proximal step.
    pub fn accept(&mut self, w_next: DVector<f64>) {
        self.w_prev = std::mem::replace(&mut self.w_curr, w_next);
    }
}

/// One step of the strongly convex momentum recursion: from `t_k` and the
/// inverse condition number `q = τμ`, produce `(t_{k+1}, β_{k+1})`.
///
/// `q = 0` recovers the classical (non-strongly-convex) recursion; `q → 1`
/// sends the extrapolation weight to zero. `q >= 1` is rejected.
pub fn momentum_step(t: f64, q: f64) -> Result<(f64, f64), SolveError> {
    if !(0.0..1.0).contains(&q) {
        return Err(SolveError::InvalidConditioning { q });
    }
    let a = 1.0 - q * t * t;
    let t_next = 0.5 * (a + (a * a + 4.0 * t * t).sqrt());
    let beta = ((t - 1.0) * (1.0 - t_next * q)) / (t_next * (1.0 - q));
    Ok((t_next, beta))
}

/// Termination rule for [`fista_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminationMode {
    /// Iterate until the certificate drops to `ε`, guaranteeing
    /// `‖w - ŵ‖² ≤ ε`.
    TargetAccuracy(f64),
    /// Run exactly this many iterations.
    FixedIterations(usize),
}

#[derive(Debug, Clone)]
pub struct Termination {
    pub mode: TerminationMode,
    /// Safety cap for [`TerminationMode::TargetAccuracy`]; hitting it is an
    /// error, not a silent return.
    pub max_iterations: usize,
    /// Compute the certificate every this many iterations (1 = every
    /// iteration). Coarser cadences trade certificate gradient evaluations
    /// against overshooting the target.
    pub certificate_interval: usize,
    /// In fixed-iteration mode certificates are skipped by default (they cost
    /// one extra gradient evaluation each); set this to attach them anyway,
    /// at `certificate_interval` cadence and at the final iterate.
    pub audit_certificates: bool,
}

pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

impl Termination {
    pub fn target(epsilon: f64) -> Self {
        Termination {
            mode: TerminationMode::TargetAccuracy(epsilon),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            certificate_interval: 1,
            audit_certificates: false,
        }
    }

    pub fn fixed(iterations: usize) -> Self {
        Termination {
            mode: TerminationMode::FixedIterations(iterations),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            certificate_interval: 1,
            audit_certificates: false,
        }
    }

    pub fn with_certificate_interval(mut self, interval: usize) -> Self {
        assert!(interval >= 1, "certificate interval must be positive");
        self.certificate_interval = interval;
        self
    }

    pub fn with_max_iterations(mut self, cap: usize) -> Self {
        self.max_iterations = cap;
        self
    }

    pub fn with_audit_certificates(mut self, audit: bool) -> Self {
        self.audit_certificates = audit;
        self
    }
}

/// Result of a lower-level solve.
#[derive(Debug, Clone)]
pub struct LowerSolution {
    pub w: DVector<f64>,
    /// `‖d‖²/μ²` at the returned iterate, when it was computed.
    pub certificate: Option<f64>,
    /// Number of proximal-gradient iterations performed.
    pub iterations: usize,
    /// `‖d‖₂` backing the certificate.
    pub subgradient_norm: Option<f64>,
    /// `f(w) + g(w)` at the returned iterate.
    pub objective: f64,
}

/// Per-iteration view handed to the observer of
/// [`fista_solve_observed`]. `certificate` is only present on iterations
/// where the cadence computed one.
pub struct IterateEvent<'a> {
    pub iteration: usize,
    pub w: &'a DVector<f64>,
    pub certificate: Option<f64>,
    pub subgradient_norm: Option<f64>,
}

/// Subgradient-based accuracy certificate. Given the iterate `w_next`
/// produced from extrapolation point `z_next` (with `grad_at_z` the smooth
/// gradient there), returns the subgradient vector `d ∈ ∂Φ(w_next)` and the
/// bound `‖d‖²/μ² ≥ ‖w_next − ŵ‖²`.
///
/// Costs one extra gradient evaluation (at `w_next`).
pub fn subgradient_certificate<P: CompositeProblem + ?Sized>(
    problem: &P,
    w_next: &DVector<f64>,
    z_next: &DVector<f64>,
    grad_at_z: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let tau = 1.0 / problem.lipschitz();
    let grad_w = problem.smooth_grad(w_next);
    let mut d = grad_w - grad_at_z;
    d.axpy(1.0 / tau, &(z_next - w_next), 1.0);
    let mu = problem.mu();
    let bound = d.norm_squared() / (mu * mu);
    (d, bound)
}

/// Worst-case squared-distance bound after `k` iterations:
/// `(1 - κ^{-1/2})^k · κ (1 + κ^{-1/2}) · ‖w⁰ - ŵ‖²`.
pub fn apriori_bound(kappa: f64, init_dist_sq: f64, k: usize) -> f64 {
    let root = kappa.sqrt().recip();
    (1.0 - root).powi(k as i32) * kappa * (1.0 + root) * init_dist_sq
}

/// Smallest iteration count whose a priori bound is at most `epsilon`.
/// Requires `kappa > 1` (at `kappa = 1` the linear-rate factor degenerates).
pub fn apriori_iterations(
    kappa: f64,
    init_dist_sq: f64,
    epsilon: f64,
) -> Result<usize, SolveError> {
    if !(kappa > 1.0) || !kappa.is_finite() {
        return Err(SolveError::DegenerateRate { kappa });
    }
    assert!(epsilon > 0.0, "accuracy target must be positive");
    assert!(init_dist_sq >= 0.0, "initial distance must be nonnegative");
    let root = kappa.sqrt().recip();
    let c0 = kappa * (1.0 + root) * init_dist_sq;
    if c0 <= epsilon {
        return Ok(0);
    }
    let rate = 1.0 - root;
    let mut k = ((epsilon / c0).ln() / rate.ln()).ceil().max(1.0) as usize;
    // Guard against rounding in the logarithms: enforce minimality directly.
    while k > 0 && apriori_bound(kappa, init_dist_sq, k - 1) <= epsilon {
        k -= 1;
    }
    while apriori_bound(kappa, init_dist_sq, k) > epsilon {
        k += 1;
    }
    Ok(k)
}

/// Soft-thresholding: the proximal operator of `threshold · ‖·‖₁`.
pub fn prox_l1(v: &DVector<f64>, threshold: f64) -> DVector<f64> {
    debug_assert!(threshold >= 0.0);
    v.map(|x| x.signum() * (x.abs() - threshold).max(0.0))
}

/// Certified accelerated proximal-gradient solve. `w0 = None` starts from the
/// origin. See [`fista_solve_observed`] for a per-iteration hook.
pub fn fista_solve<P: CompositeProblem + ?Sized>(
    problem: &P,
    w0: Option<&DVector<f64>>,
    termination: &Termination,
) -> Result<LowerSolution, SolveError> {
    fista_solve_observed(problem, w0, termination, |_| {})
}

/// [`fista_solve`] with an observer invoked once per iteration, after the new
/// iterate (and its certificate, when scheduled) is available. Tracing and
/// error-history experiments hang off this hook.
pub fn fista_solve_observed<P, F>(
    problem: &P,
    w0: Option<&DVector<f64>>,
    termination: &Termination,
    mut observer: F,
) -> Result<LowerSolution, SolveError>
where
    P: CompositeProblem + ?Sized,
    F: FnMut(&IterateEvent),
{
    let dim = problem.dim();
    let mu = problem.mu();
    let lip = problem.lipschitz();
    if !(mu > 0.0) || !(lip >= mu) || !lip.is_finite() {
        return Err(SolveError::InvalidConstants { mu, lipschitz: lip });
    }
    let tau = 1.0 / lip;
    // For perfectly conditioned problems q = τμ = 1 would zero the
    // denominator of the extrapolation weight; clamp just below one. μ itself
    // (used by certificates) is never clamped.
    let q = (tau * mu).min(1.0 - 1e-12);

    let start = match w0 {
        Some(w) => {
            assert_eq!(w.len(), dim, "starting point dimension mismatch");
            w.clone()
        }
        None => DVector::zeros(dim),
    };
    if start.iter().any(|x| !x.is_finite()) {
        return Err(SolveError::Diverged { iteration: 0 });
    }
    let mut state = MomentumState::new(start, tau, q);
    let mut k = 0usize;
    let mut best_certificate = f64::INFINITY;
    let mut final_certificate: Option<f64> = None;
    let mut final_subgrad_norm: Option<f64> = None;

    let (target, fixed_count) = match termination.mode {
        TerminationMode::TargetAccuracy(eps) => {
            assert!(eps > 0.0, "accuracy target must be positive");
            (Some(eps), None)
        }
        TerminationMode::FixedIterations(n) => (None, Some(n)),
    };

    loop {
        if let Some(n) = fixed_count {
            if k == n {
                break;
            }
        }
        if target.is_some() && k >= termination.max_iterations {
            return Err(SolveError::AccuracyUnreachable {
                target: target.unwrap(),
                iterations: k,
                best_certificate,
            });
        }

        let z = state.extrapolate()?;
        let grad_z = problem.smooth_grad(&z);
        let mut v = z.clone();
        v.axpy(-tau, &grad_z, 1.0);
        let w_next = problem.prox(&v, tau);
        if w_next.iter().any(|x| !x.is_finite()) {
            return Err(SolveError::Diverged { iteration: k + 1 });
        }
        k += 1;

        let due = k % termination.certificate_interval == 0;
        let want_certificate = match termination.mode {
            TerminationMode::TargetAccuracy(_) => due,
            TerminationMode::FixedIterations(n) => {
                termination.audit_certificates && (due || k == n)
            }
        };
        let (certificate, subgrad_norm) = if want_certificate {
            let (d, bound) = subgradient_certificate(problem, &w_next, &z, &grad_z);
            best_certificate = best_certificate.min(bound);
            (Some(bound), Some(d.norm()))
        } else {
            (None, None)
        };

        observer(&IterateEvent {
            iteration: k,
            w: &w_next,
            certificate,
            subgradient_norm: subgrad_norm,
        });

        state.accept(w_next);
        final_certificate = certificate;
        final_subgrad_norm = subgrad_norm;

        if let (Some(eps), Some(cert)) = (target, certificate) {
            if cert <= eps {
                break;
            }
        }
    }

    let objective = problem.objective(&state.w_curr);
    Ok(LowerSolution {
        w: state.w_curr,
        certificate: final_certificate,
        iterations: k,
        subgradient_norm: final_subgrad_norm,
        objective,
    })
}

/// One row of a per-iteration trace: iteration index, objective value and
/// certificate (when computed that iteration).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub certificate: Option<f64>,
}

/// Write trace rows as CSV with header `iter,objective,certificate`. Floats
/// carry 17 significant digits so parsing them back is lossless; a missing
/// certificate becomes an empty field.
pub fn write_trace_csv<W: std::io::Write>(out: &mut W, rows: &[TraceRow]) -> std::io::Result<()> {
    writeln!(out, "iter,objective,certificate")?;
    for row in rows {
        match row.certificate {
            Some(c) => writeln!(out, "{},{:.16e},{:.16e}", row.iter, row.objective, c)?,
            None => writeln!(out, "{},{:.16e},", row.iter, row.objective)?,
        }
    }
    Ok(())
}
