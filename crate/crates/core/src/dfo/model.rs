//! Gauss-Newton model of the upper objective, built by interpolating the
//! residual vector linearly through the current point set.
//!
//! With residuals `r(θ) ≈ r(base) + J·(θ − base)` fitted so the model matches
//! every stored point exactly, the induced quadratic
//! `q(s) = ‖r_base + J s‖² = F_base + 2 gᵀs + sᵀ H s` (with `g = Jᵀ r_base`,
//! `H = JᵀJ`) interpolates the true objective at all m+1 points too. `H` is
//! positive semidefinite by construction, which the step computation relies
//! on.

use nalgebra::{DMatrix, DVector};

use super::interp::InterpolationSet;
use super::DfoError;

/// Reject difference matrices more ill-conditioned than this; the linear
/// solve behind the model would amplify residual noise by the same factor.
pub const CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct GNModel {
    base: DVector<f64>,
    f_base: f64,
    r_base: DVector<f64>,
    jacobian: DMatrix<f64>,
    /// `Jᵀ r_base` — half the model gradient of the objective.
    gradient: DVector<f64>,
    /// `JᵀJ` — half the model Hessian of the objective.
    hessian: DMatrix<f64>,
}

/// Fit the model to the current interpolation set.
///
/// Solves `D X = ΔR` where row i of `D` is `pᵢ − base` and row i of `ΔR` is
/// `r(pᵢ) − r(base)`, then `J = Xᵀ`. Fails when the set geometry is too
/// degenerate to invert.
pub fn build_model(set: &InterpolationSet) -> Result<GNModel, DfoError> {
    let m = set.dim();
    assert_eq!(set.len(), m + 1, "need exactly m+1 interpolation points");
    let condition = set.condition();
    if !(condition <= CONDITION_LIMIT) {
        return Err(DfoError::DegenerateGeometry { condition });
    }
    let d = set.difference_matrix();
    let r_base = set.base_data().residuals.clone();
    let n = r_base.len();
    let mut delta_r = DMatrix::zeros(m, n);
    let mut at = 0;
    for i in 0..set.len() {
        if i == set.base_index() {
            continue;
        }
        let diff = &set.data(i).residuals - &r_base;
        assert_eq!(diff.len(), n, "residual stacks must share a length");
        delta_r.row_mut(at).copy_from(&diff.transpose());
        at += 1;
    }
    let x = d
        .lu()
        .solve(&delta_r)
        .ok_or(DfoError::DegenerateGeometry { condition })?;
    let jacobian = x.transpose();
    let gradient = jacobian.transpose() * &r_base;
    let hessian = jacobian.transpose() * &jacobian;
    let model = GNModel {
        base: set.base_point().clone(),
        f_base: set.base_data().objective,
        r_base,
        jacobian,
        gradient,
        hessian,
    };
    // The fit must reproduce its own interpolation data; anything beyond
    // roundoff means the linear algebra above is wrong.
    #[cfg(debug_assertions)]
    for i in 0..set.len() {
        let s = set.point(i) - &model.base;
        let predicted = model.predict_residuals(&s);
        let truth = &set.data(i).residuals;
        let err = (&predicted - truth).norm();
        debug_assert!(
            err <= 1e-9 * (1.0 + truth.norm()),
            "model fails to interpolate point {i}: residual error {err:e}"
        );
        let qv = model.value(&s);
        let fv = set.data(i).objective;
        debug_assert!(
            (qv - fv).abs() <= 1e-9 * (1.0 + fv.abs()),
            "model fails to interpolate objective at point {i}: {qv} vs {fv}"
        );
    }
    Ok(model)
}

impl GNModel {
    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    pub fn f_base(&self) -> f64 {
        self.f_base
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    /// Half the model gradient (`Jᵀ r_base`); the gradient of the objective
    /// model itself is twice this.
    pub fn gradient(&self) -> &DVector<f64> {
        &self.gradient
    }

    /// Half the model Hessian (`JᵀJ`), positive semidefinite.
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    /// Norm of the full model gradient `2‖Jᵀ r_base‖`; the stationarity
    /// measure used by the outer loop.
    pub fn gradient_norm(&self) -> f64 {
        2.0 * self.gradient.norm()
    }

    /// Linear residual prediction at `base + s`.
    pub fn predict_residuals(&self, s: &DVector<f64>) -> DVector<f64> {
        &self.r_base + &self.jacobian * s
    }

    /// Model objective at `base + s`:
    /// `F_base + 2 gᵀ s + sᵀ H s = ‖r_base + J s‖²`.
    pub fn value(&self, s: &DVector<f64>) -> f64 {
        self.f_base + 2.0 * self.gradient.dot(s) + (&self.hessian * s).dot(s)
    }

    /// Predicted objective decrease for step `s` (positive is good):
    /// `F_base − q(s) = −2 gᵀ s − sᵀ H s`.
    pub fn decrease(&self, s: &DVector<f64>) -> f64 {
        -2.0 * self.gradient.dot(s) - (&self.hessian * s).dot(s)
    }
}
