//! Interpolation-set bookkeeping for the trust-region solver: m+1 affinely
//! independent points, their residual data, and the geometry diagnostics
//! (difference-matrix conditioning, repair directions) that keep the
//! Gauss-Newton model well posed.

use nalgebra::{DMatrix, DVector};

use super::DfoError;

/// Everything stored per interpolation point besides its location.
#[derive(Debug, Clone)]
pub struct PointData {
    /// Stacked upper-level residual vector at this point.
    pub residuals: DVector<f64>,
    /// Squared l2 norm of `residuals` — the upper objective value.
    pub objective: f64,
    /// Per-task accuracy certificates backing `residuals` (`None` for
    /// uncertified fixed-iteration solves).
    pub certificates: Vec<Option<f64>>,
}

/// The starting simplex: `theta0` plus a step of `±delta` along each
/// coordinate, with the sign chosen to stay inside the box. Fails only when
/// some coordinate cannot move by `delta` in either direction.
pub fn initial_simplex(
    theta0: &DVector<f64>,
    delta: f64,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Result<Vec<DVector<f64>>, DfoError> {
    assert!(delta > 0.0, "initial radius must be positive");
    let m = theta0.len();
    let mut points = Vec::with_capacity(m + 1);
    points.push(theta0.clone());
    for j in 0..m {
        let mut p = theta0.clone();
        if theta0[j] + delta <= hi[j] {
            p[j] += delta;
        } else if theta0[j] - delta >= lo[j] {
            p[j] -= delta;
        } else {
            return Err(DfoError::InfeasibleGeometry {
                at: theta0.iter().copied().collect(),
            });
        }
        points.push(p);
    }
    Ok(points)
}

#[derive(Debug, Clone)]
pub struct InterpolationSet {
    points: Vec<DVector<f64>>,
    data: Vec<PointData>,
    base: usize,
}

impl InterpolationSet {
    /// Build from matched point/data lists; the base starts at the lowest
    /// objective (earliest index on ties).
    pub fn new(points: Vec<DVector<f64>>, data: Vec<PointData>) -> Self {
        assert_eq!(points.len(), data.len());
        assert!(!points.is_empty());
        let base = (0..data.len())
            .min_by(|&a, &b| data[a].objective.total_cmp(&data[b].objective))
            .unwrap();
        InterpolationSet { points, data, base }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &DVector<f64> {
        &self.points[i]
    }

    pub fn data(&self, i: usize) -> &PointData {
        &self.data[i]
    }

    pub fn set_data(&mut self, i: usize, data: PointData) {
        self.data[i] = data;
    }

    pub fn base_index(&self) -> usize {
        self.base
    }

    pub fn base_point(&self) -> &DVector<f64> {
        &self.points[self.base]
    }

    pub fn base_data(&self) -> &PointData {
        &self.data[self.base]
    }

    pub fn set_base(&mut self, i: usize) {
        assert!(i < self.points.len());
        self.base = i;
    }

    /// Index of the point whose objective is currently smallest (earliest
    /// index on ties).
    pub fn best_index(&self) -> usize {
        (0..self.data.len())
            .min_by(|&a, &b| self.data[a].objective.total_cmp(&self.data[b].objective))
            .unwrap()
    }

    /// Bitwise-equal point lookup, mirroring the evaluation cache's keying.
    pub fn find_point(&self, theta: &DVector<f64>) -> Option<usize> {
        self.points.iter().position(|p| {
            p.len() == theta.len()
                && p.iter()
                    .zip(theta.iter())
                    .all(|(a, b)| a.to_bits() == b.to_bits())
        })
    }

    /// Index (≠ base) farthest from the base point; lowest index on ties.
    pub fn farthest_from_base(&self) -> usize {
        let mut best = usize::MAX;
        let mut best_dist = -1.0;
        for i in 0..self.points.len() {
            if i == self.base {
                continue;
            }
            let d = (&self.points[i] - self.base_point()).norm();
            if d > best_dist {
                best_dist = d;
                best = i;
            }
        }
        best
    }

    pub fn replace(&mut self, index: usize, point: DVector<f64>, data: PointData) {
        assert!(index < self.points.len());
        self.points[index] = point;
        self.data[index] = data;
    }

    /// Rows are `pᵢ − base` for every non-base point, ordered by index. This
    /// is the linear system matrix of the residual-interpolation model.
    pub fn difference_matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        let rows = self.points.len() - 1;
        let mut d = DMatrix::zeros(rows, m);
        let mut at = 0;
        for i in 0..self.points.len() {
            if i == self.base {
                continue;
            }
            let diff = &self.points[i] - self.base_point();
            d.row_mut(at).copy_from(&diff.transpose());
            at += 1;
        }
        d
    }

    /// Spectral condition number of the difference matrix (∞ when singular).
    /// Scale-invariant: shrinking the whole set does not change it.
    pub fn condition(&self) -> f64 {
        let d = self.difference_matrix();
        let sv = d.svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        if smin <= 0.0 || !smin.is_finite() {
            f64::INFINITY
        } else {
            smax / smin
        }
    }

    /// Direction in which the set carries the least information: the unit
    /// right-singular vector of the difference matrix for its smallest
    /// singular value, sign-fixed so the first nonzero component is positive.
    /// Moving one point a full radius along this direction restores the
    /// geometry.
    pub fn repair_direction(&self) -> DVector<f64> {
        let d = self.difference_matrix();
        // Eigenvector of DᵀD for the smallest eigenvalue.
        let gram = d.transpose() * &d;
        let eig = gram.symmetric_eigen();
        let mut min_i = 0;
        for i in 0..eig.eigenvalues.len() {
            if eig.eigenvalues[i] < eig.eigenvalues[min_i] {
                min_i = i;
            }
        }
        let mut v: DVector<f64> = eig.eigenvectors.column(min_i).into_owned();
        let norm = v.norm();
        assert!(norm > 0.0, "eigenvector cannot vanish");
        v /= norm;
        if let Some(&lead) = v.iter().find(|x| **x != 0.0) {
            if lead < 0.0 {
                v = -v;
            }
        }
        v
    }
}

/// Fold a freshly evaluated trial point into the set.
///
/// A trial within a relative tolerance of a stored point (bitwise duplicates
/// included) must not evict anything: inserting it next to its twin would
/// leave two nearly identical rows in the difference matrix and the model
/// build would die of singularity. Such a trial refreshes the twin in place
/// (location and data), except that a rejected near-duplicate of the base is
/// dropped outright so the incumbent is never overwritten by worse data at
/// essentially the same location. Otherwise the trial replaces the stored
/// point farthest from it (accepted steps) or farthest from the current base
/// excluding the base itself (rejected steps), keeping the set size fixed.
/// Accepted trials become the new base.
pub fn update_interpolation_set(
    set: &mut InterpolationSet,
    trial: DVector<f64>,
    data: PointData,
    accepted: bool,
) {
    let tol = 1e-10 * (1.0 + trial.norm());
    let nearest = (0..set.len())
        .min_by(|&a, &b| {
            let da = (set.point(a) - &trial).norm();
            let db = (set.point(b) - &trial).norm();
            da.total_cmp(&db)
        })
        .unwrap();
    if (set.point(nearest) - &trial).norm() <= tol {
        if !accepted && nearest == set.base_index() {
            return;
        }
        set.replace(nearest, trial, data);
        if accepted {
            set.set_base(nearest);
        }
        return;
    }
    let victim = if accepted {
        // Farthest from the incoming base; every stored point is a candidate.
        let mut best = 0;
        let mut best_dist = -1.0;
        for i in 0..set.len() {
            let d = (set.point(i) - &trial).norm();
            if d > best_dist {
                best_dist = d;
                best = i;
            }
        }
        best
    } else {
        set.farthest_from_base()
    };
    let rebase = accepted;
    set.replace(victim, trial, data);
    if rebase {
        set.set_base(victim);
    }
}
