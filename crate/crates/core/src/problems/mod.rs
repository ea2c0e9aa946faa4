//! Concrete lower- and upper-level problem instances.
//!
//! The lower level consists of per-digit elastic-net regularised logistic
//! regressions sharing a hyperparameter vector `θ = (θ₁, θ₂)`, where `10^θ₁`
//! weights the l2 term and `10^θ₂` the l1 term. The upper level scores the
//! trained weights on held-out samples through sigmoid residuals and adds two
//! regularisation residuals: one penalising ill-conditioning of the lower
//! level, one rewarding sparsity-inducing `θ₂`.

mod lasso;
mod logistic;
mod spectral;

pub use lasso::{generate_lasso_instance, lasso_problem, LassoProblem};
pub use logistic::{elastic_net_problem, logistic_smooth_part, ElasticNetProblem, LogisticSmooth};
pub use spectral::spectral_norm_sq;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("matrix is identically zero; spectral norm iteration cannot start")]
    ZeroMatrix,
    #[error("l2 weight must be positive for strong convexity (got {weight})")]
    NotStronglyConvex { weight: f64 },
    #[error("theta {theta:?} violates bounds [{lower:?}, {upper:?}]")]
    OutOfBounds {
        theta: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    #[error("labels must be +1 or -1 (entry {index} is {value})")]
    BadLabel { index: usize, value: f64 },
    #[error("dimension mismatch: {context}")]
    Shape { context: String },
}

/// A point in the hyperparameter box. The bounds travel with the point so
/// trust-region steps can be clipped without consulting global state.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPoint {
    theta: DVector<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl HyperPoint {
    pub fn new(
        theta: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self, ProblemError> {
        if theta.len() != lower.len() || theta.len() != upper.len() {
            return Err(ProblemError::Shape {
                context: format!(
                    "theta has {} entries, bounds have {}/{}",
                    theta.len(),
                    lower.len(),
                    upper.len()
                ),
            });
        }
        for i in 0..theta.len() {
            if !(lower[i] <= theta[i] && theta[i] <= upper[i]) {
                return Err(ProblemError::OutOfBounds {
                    theta: theta.iter().copied().collect(),
                    lower: lower.iter().copied().collect(),
                    upper: upper.iter().copied().collect(),
                });
            }
        }
        Ok(HyperPoint {
            theta,
            lower,
            upper,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    /// Same bounds, new coordinates; errors if they fall outside the box.
    pub fn with_theta(&self, theta: DVector<f64>) -> Result<Self, ProblemError> {
        HyperPoint::new(theta, self.lower.clone(), self.upper.clone())
    }

    /// Same bounds, coordinates clamped into the box.
    pub fn clipped(&self, theta: DVector<f64>) -> Self {
        let clipped = DVector::from_fn(theta.len(), |i, _| {
            theta[i].clamp(self.lower[i], self.upper[i])
        });
        HyperPoint {
            theta: clipped,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }
}

/// One binary classification task: training split used by the lower-level
/// solver, test split scored by the upper level. Labels are ±1.
#[derive(Debug, Clone)]
pub struct BinaryTask {
    pub features: DMatrix<f64>,
    pub labels: DVector<f64>,
    pub test_features: DMatrix<f64>,
    pub test_labels: DVector<f64>,
    pub digit: u8,
}

impl BinaryTask {
    pub fn new(
        features: DMatrix<f64>,
        labels: DVector<f64>,
        test_features: DMatrix<f64>,
        test_labels: DVector<f64>,
        digit: u8,
    ) -> Result<Self, ProblemError> {
        if features.nrows() != labels.len() {
            return Err(ProblemError::Shape {
                context: format!(
                    "{} training rows vs {} labels",
                    features.nrows(),
                    labels.len()
                ),
            });
        }
        if test_features.nrows() != test_labels.len() {
            return Err(ProblemError::Shape {
                context: format!(
                    "{} test rows vs {} labels",
                    test_features.nrows(),
                    test_labels.len()
                ),
            });
        }
        if features.ncols() != test_features.ncols() {
            return Err(ProblemError::Shape {
                context: format!(
                    "train dim {} vs test dim {}",
                    features.ncols(),
                    test_features.ncols()
                ),
            });
        }
        for (i, &y) in labels.iter().chain(test_labels.iter()).enumerate() {
            if y != 1.0 && y != -1.0 {
                return Err(ProblemError::BadLabel { index: i, value: y });
            }
        }
        Ok(BinaryTask {
            features,
            labels,
            test_features,
            test_labels,
            digit,
        })
    }

    pub fn train_count(&self) -> usize {
        self.features.nrows()
    }

    pub fn test_count(&self) -> usize {
        self.test_features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Fraction of +1 labels in the training split.
    pub fn positive_fraction(&self) -> f64 {
        let pos = self.labels.iter().filter(|&&y| y == 1.0).count();
        pos as f64 / self.labels.len() as f64
    }
}

/// Overflow-safe logistic sigmoid.
pub fn sigm(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Class prediction from a linear score; ties at zero go to the positive
/// class (`sigm(0) = 0.5` rounds up).
pub fn predict(w: &DVector<f64>, x: &DVector<f64>) -> bool {
    w.dot(x) >= 0.0
}

/// Upper-level residuals on one task's test split:
/// `sigm(wᵀx̃ᵢ) - p̃ᵢ` with `p̃ᵢ = 1` for positive test labels, else 0.
pub fn test_residuals(w: &DVector<f64>, task: &BinaryTask) -> DVector<f64> {
    let scores = &task.test_features * w;
    DVector::from_fn(scores.len(), |i, _| {
        let target = if task.test_labels[i] == 1.0 { 1.0 } else { 0.0 };
        sigm(scores[i]) - target
    })
}

/// The two upper-level regularisation residuals:
/// `[sqrt(α₁)·(L/μ), sqrt(α₂)·10^{-θ₂/2}]`. Their squared sum penalises
/// ill-conditioned lower-level problems and rewards large l1 exponents.
pub fn regularizer_residuals(
    point: &HyperPoint,
    mu: f64,
    lipschitz: f64,
    alpha1: f64,
    alpha2: f64,
) -> [f64; 2] {
    let theta2 = point.theta()[1];
    [
        alpha1.sqrt() * (lipschitz / mu),
        alpha2.sqrt() * 10f64.powf(-theta2 / 2.0),
    ]
}

/// Stacked upper-level residuals for one hyperparameter point: the per-task
/// test residual blocks in task order, then the two regularisation entries.
/// `objective` is the squared l2 norm of the stack, accumulated in that same
/// fixed order so repeated assemblies are bitwise identical.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperResiduals {
    pub per_task: Vec<DVector<f64>>,
    pub reg: [f64; 2],
    pub objective: f64,
}

impl UpperResiduals {
    pub fn assemble(per_task: Vec<DVector<f64>>, reg: [f64; 2]) -> Self {
        let mut objective = 0.0;
        for r in &per_task {
            objective += r.norm_squared();
        }
        objective += reg[0] * reg[0] + reg[1] * reg[1];
        UpperResiduals {
            per_task,
            reg,
            objective,
        }
    }

    pub fn len(&self) -> usize {
        self.per_task.iter().map(|r| r.len()).sum::<usize>() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Concatenate into a single vector (task blocks in order, then the
    /// regularisation pair).
    pub fn stacked(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        let mut at = 0;
        for r in &self.per_task {
            out.rows_mut(at, r.len()).copy_from(r);
            at += r.len();
        }
        out[at] = self.reg[0];
        out[at + 1] = self.reg[1];
        out
    }
}
