//! Elastic-net regularised logistic regression for one binary task.

use nalgebra::DVector;

use crate::composite::{prox_l1, CompositeProblem};

use super::{BinaryTask, HyperPoint, ProblemError};

/// Smooth part of the elastic-net objective:
/// `(1/N) Σ log(1 + exp(-yᵢ wᵀxᵢ)) + (λ₂/2) ‖w‖²` with `λ₂ = 10^θ₁`.
#[derive(Debug, Clone)]
pub struct LogisticSmooth<'a> {
    task: &'a BinaryTask,
    pub l2_weight: f64,
}

/// Numerically safe `log(1 + exp(x))`.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl<'a> LogisticSmooth<'a> {
    pub fn eval(&self, w: &DVector<f64>) -> (f64, DVector<f64>) {
        let task = self.task;
        let n = task.train_count() as f64;
        let margins = &task.features * w;
        let mut value = 0.0;
        let mut slopes = DVector::zeros(task.train_count());
        for i in 0..task.train_count() {
            let m = task.labels[i] * margins[i];
            value += softplus(-m);
            // d/dm log(1+exp(-m)) = -sigm(-m)
            slopes[i] = -task.labels[i] * super::sigm(-m) / n;
        }
        value /= n;
        value += 0.5 * self.l2_weight * w.norm_squared();
        let mut grad = task.features.tr_mul(&slopes);
        grad.axpy(self.l2_weight, w, 1.0);
        (value, grad)
    }
}

/// Smooth component of the per-task objective at l2 exponent `theta1`.
pub fn logistic_smooth_part(task: &BinaryTask, theta1: f64) -> LogisticSmooth<'_> {
    LogisticSmooth {
        task,
        l2_weight: 10f64.powf(theta1),
    }
}

/// The full composite objective for one task at hyperparameters
/// `θ = (θ₁, θ₂)`: logistic loss plus `(10^θ₁/2)‖w‖²` (smooth) and
/// `10^θ₂ ‖w‖₁` (nonsmooth).
///
/// `spectral_sq` must be the squared spectral norm of the training feature
/// matrix; it is caller-supplied so it can be computed once per task and
/// reused across hyperparameter points. The curvature constants are then
/// exact: `μ = 10^θ₁`, `L = spectral_sq / (4N) + 10^θ₁`.
#[derive(Debug, Clone)]
pub struct ElasticNetProblem<'a> {
    smooth: LogisticSmooth<'a>,
    pub l1_weight: f64,
    mu: f64,
    lipschitz: f64,
}

pub fn elastic_net_problem<'a>(
    task: &'a BinaryTask,
    point: &HyperPoint,
    spectral_sq: f64,
) -> Result<ElasticNetProblem<'a>, ProblemError> {
    assert_eq!(point.dim(), 2, "expected a two-dimensional hyperparameter");
    let theta1 = point.theta()[0];
    let theta2 = point.theta()[1];
    let l2_weight = 10f64.powf(theta1);
    if !(l2_weight > 0.0) || !l2_weight.is_finite() {
        return Err(ProblemError::NotStronglyConvex { weight: l2_weight });
    }
    let n = task.train_count() as f64;
    Ok(ElasticNetProblem {
        smooth: LogisticSmooth {
            task,
            l2_weight,
        },
        l1_weight: 10f64.powf(theta2),
        mu: l2_weight,
        lipschitz: spectral_sq / (4.0 * n) + l2_weight,
    })
}

impl CompositeProblem for ElasticNetProblem<'_> {
    fn dim(&self) -> usize {
        self.smooth.task.feature_dim()
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn smooth_eval(&self, w: &DVector<f64>) -> (f64, DVector<f64>) {
        self.smooth.eval(w)
    }

    fn nonsmooth_value(&self, w: &DVector<f64>) -> f64 {
        self.l1_weight * w.iter().map(|x| x.abs()).sum::<f64>()
    }

    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        prox_l1(v, step * self.l1_weight)
    }
}
