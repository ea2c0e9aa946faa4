//! Squared spectral norm via power iteration on `XᵀX`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ProblemError;

/// Relative tolerance on successive Rayleigh quotients.
const REL_TOL: f64 = 1e-10;
/// Iteration cap; the estimate at the cap is still returned (inflated).
const MAX_ITERS: usize = 10_000;
/// The estimate is inflated by this factor so downstream step sizes stay on
/// the safe side of the true curvature.
const INFLATION: f64 = 1.0 + 1e-8;

/// Estimate `‖X‖₂²` (largest eigenvalue of `XᵀX`) by power iteration,
/// starting from a fixed ChaCha8-seeded random direction so results are
/// reproducible. Converges to relative tolerance 1e-10 or stops after 10⁴
/// iterations; the returned value is inflated by `1 + 1e-8`.
pub fn spectral_norm_sq(x: &DMatrix<f64>) -> Result<f64, ProblemError> {
    if x.iter().all(|&v| v == 0.0) {
        return Err(ProblemError::ZeroMatrix);
    }
    let n = x.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5eed);
    let mut v: DVector<f64> = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
    v /= v.norm();
    let mut rayleigh = 0.0;
    for _ in 0..MAX_ITERS {
        let image = x * &v; // X v
        let r = image.norm_squared(); // vᵀ XᵀX v for unit v
        let mut next = x.tr_mul(&image); // XᵀX v
        let norm = next.norm();
        if norm == 0.0 {
            // v happens to lie in the null space; redraw deterministically.
            v = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
            v /= v.norm();
            rayleigh = 0.0;
            continue;
        }
        next /= norm;
        let converged = (r - rayleigh).abs() <= REL_TOL * r.max(f64::MIN_POSITIVE);
        rayleigh = r;
        v = next;
        if converged {
            break;
        }
    }
    Ok(rayleigh * INFLATION)
}
