//! l1/l2-regularised least squares on a dense random instance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::composite::{prox_l1, CompositeProblem};

use super::{HyperPoint, ProblemError};

/// `Φ(w) = ½‖Aw - b‖² + (θ₁/2)‖w‖² + θ₂‖w‖₁` with the weights used
/// directly (no exponentiation). `μ = θ₁` exactly; the gradient Lipschitz
/// bound uses the squared Frobenius norm of `A`, a cheap upper bound on the
/// squared spectral norm that reproduces the conditioning regime this
/// instance is studied in (`L ≈ 2·10⁴` for a standard-normal 100×200 matrix).
#[derive(Debug, Clone)]
pub struct LassoProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub l2_weight: f64,
    pub l1_weight: f64,
    mu: f64,
    lipschitz: f64,
}

pub fn lasso_problem(
    a: DMatrix<f64>,
    b: DVector<f64>,
    point: &HyperPoint,
) -> Result<LassoProblem, ProblemError> {
    assert_eq!(point.dim(), 2, "expected a two-dimensional hyperparameter");
    if a.nrows() != b.len() {
        return Err(ProblemError::Shape {
            context: format!("A has {} rows, b has {}", a.nrows(), b.len()),
        });
    }
    let l2_weight = point.theta()[0];
    let l1_weight = point.theta()[1];
    if !(l2_weight > 0.0) {
        return Err(ProblemError::NotStronglyConvex { weight: l2_weight });
    }
    let frob_sq = a.norm_squared();
    Ok(LassoProblem {
        a,
        b,
        l2_weight,
        l1_weight,
        mu: l2_weight,
        lipschitz: frob_sq + l2_weight,
    })
}

impl CompositeProblem for LassoProblem {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn smooth_eval(&self, w: &DVector<f64>) -> (f64, DVector<f64>) {
        let r = &self.a * w - &self.b;
        let value = 0.5 * r.norm_squared() + 0.5 * self.l2_weight * w.norm_squared();
        let mut grad = self.a.tr_mul(&r);
        grad.axpy(self.l2_weight, w, 1.0);
        (value, grad)
    }

    fn nonsmooth_value(&self, w: &DVector<f64>) -> f64 {
        self.l1_weight * w.iter().map(|x| x.abs()).sum::<f64>()
    }

    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        prox_l1(v, step * self.l1_weight)
    }
}

/// Draw a dense instance `(A, w0, b)` with independent standard-normal
/// entries from a ChaCha8 stream seeded with `seed`. `A` is filled in
/// column-major order, then `w0` (length `cols`), then `b` (length `rows`),
/// so the draw sequence is part of the format.
pub fn generate_lasso_instance(
    seed: u64,
    rows: usize,
    cols: usize,
) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let w0 = DVector::from_fn(cols, |_, _| rng.sample(StandardNormal));
    let b = DVector::from_fn(rows, |_, _| rng.sample(StandardNormal));
    (a, w0, b)
}
