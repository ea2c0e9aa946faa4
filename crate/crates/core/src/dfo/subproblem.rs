//! Trust-region step computation for the Gauss-Newton model.
//!
//! The model objective is `q(s) = F_base + 2 gᵀs + sᵀ H s` with `H = JᵀJ ⪰ 0`,
//! minimised subject to `‖s‖ ≤ Δ` and the hyperparameter box. The ball
//! problem is solved exactly through the eigendecomposition of `H` (the
//! problems here have a handful of hyperparameters, so dense eigensolves are
//! free); the box is then handled by clipping plus a projected-gradient arc
//! search, returning whichever feasible candidate predicts the largest
//! decrease.

use nalgebra::DVector;

use super::model::GNModel;

/// Compute a feasible step from the model's base point. Returns the step and
/// its predicted objective decrease (`F_base − q(s)`, nonnegative). A zero
/// step with zero decrease means the model is stationary at this radius and
/// the caller should shrink.
pub fn solve_tr_subproblem(
    model: &GNModel,
    radius: f64,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> (DVector<f64>, f64) {
    assert!(radius > 0.0 && radius.is_finite());
    let g = model.gradient();
    let h = model.hessian();
    let m = g.len();
    let base = model.base();
    let slo = lo - base;
    let shi = hi - base;
    debug_assert!(
        (0..m).all(|i| slo[i] <= 1e-12 && shi[i] >= -1e-12),
        "model base must lie inside the box"
    );

    let gnorm = g.norm();
    if gnorm == 0.0 {
        // φ(s) = ½ sᵀHs ≥ 0 with H ⪰ 0: the origin is already optimal.
        return (DVector::zeros(m), 0.0);
    }

    // Exact ball solution in the eigenbasis of H: s(λ) = −(H + λI)⁻¹ g with
    // λ ≥ 0 chosen so ‖s(λ)‖ = Δ unless the λ = 0 solution is interior.
    // Tiny negative eigenvalues are roundoff — H is a Gram matrix.
    let eig = h.clone().symmetric_eigen();
    let ghat = eig.eigenvectors.transpose() * g;
    let shat_norm = |lam: f64| -> f64 {
        let mut sum = 0.0;
        for i in 0..m {
            let den = eig.eigenvalues[i].max(0.0) + lam;
            if den <= 0.0 {
                if ghat[i] != 0.0 {
                    return f64::INFINITY;
                }
            } else {
                let si = ghat[i] / den;
                sum += si * si;
            }
        }
        sum.sqrt()
    };
    let shat = |lam: f64| -> DVector<f64> {
        DVector::from_fn(m, |i, _| {
            let den = eig.eigenvalues[i].max(0.0) + lam;
            if den <= 0.0 {
                0.0
            } else {
                -ghat[i] / den
            }
        })
    };

    let s_ball = if shat_norm(0.0) <= radius {
        // Interior (Newton / minimum-norm) solution. Coordinates with a zero
        // eigenvalue and zero gradient are left at zero: they change nothing.
        &eig.eigenvectors * shat(0.0)
    } else {
        // ‖s(λ)‖ is strictly decreasing; ‖s(λ)‖ ≤ ‖g‖/λ gives a bracket.
        let mut lo_l = 0.0;
        let mut hi_l = gnorm / radius;
        while shat_norm(hi_l) > radius {
            hi_l *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo_l + hi_l);
            if shat_norm(mid) > radius {
                lo_l = mid;
            } else {
                hi_l = mid;
            }
        }
        &eig.eigenvectors * shat(hi_l)
    };

    // Both constraint sets contain the origin, so clamping into the box can
    // only shrink components, and scaling back into the ball stays in the
    // box. `to_feasible` therefore lands in the intersection.
    let clip_box = |s: &DVector<f64>| {
        DVector::from_fn(m, |i, _| s[i].clamp(slo[i].min(0.0), shi[i].max(0.0)))
    };
    let to_feasible = |s: &DVector<f64>| {
        let c = clip_box(s);
        let n = c.norm();
        if n > radius {
            c * (radius / n)
        } else {
            c
        }
    };

    let ball_feasible = to_feasible(&s_ball);
    let box_active = (&ball_feasible - &s_ball).norm() > 1e-13 * radius.max(1.0);

    let mut candidates = vec![ball_feasible];
    // Projected-gradient arc: walk the steepest-descent ray, projected into
    // the feasible set, backtracking from the full-radius step. When the box
    // truncates the exact ball step badly, one of these usually recovers a
    // guaranteed fraction of the Cauchy decrease.
    let mut t = radius / gnorm;
    for _ in 0..40 {
        candidates.push(to_feasible(&(g * -t)));
        t *= 0.5;
    }

    let mut best_s = DVector::zeros(m);
    let mut best_dec = 0.0;
    for s in candidates {
        let dec = model.decrease(&s);
        if dec > best_dec {
            best_dec = dec;
            best_s = s;
        }
    }

    #[cfg(debug_assertions)]
    if !box_active {
        // With the box inactive the eigendecomposition step is the global
        // ball minimiser; no arc candidate may beat it beyond roundoff.
        let exact = model.decrease(&s_ball);
        debug_assert!(
            exact >= best_dec - 1e-9 * (1.0 + best_dec.abs()),
            "ball solve lost to a line search: {exact:e} < {best_dec:e}"
        );
    }
    #[cfg(not(debug_assertions))]
    let _ = box_active;

    (best_s, best_dec)
}
