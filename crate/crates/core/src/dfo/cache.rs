//! Memoization of lower-level solves keyed by exact hyperparameters.

use std::collections::HashMap;

use nalgebra::DVector;

/// Cached result of the most recent solve of one task at one θ.
#[derive(Debug, Clone)]
pub struct CachedSolve {
    pub w: DVector<f64>,
    /// Certified squared-distance bound, when the producing solve computed
    /// one.
    pub certificate: Option<f64>,
    /// Total inner iterations recorded into this entry (cold solve plus any
    /// warm-started refinements).
    pub iterations: usize,
    /// Set when the entry came from a fixed-iteration solve with that count;
    /// such entries are only reused for the identical count.
    pub fixed_k: Option<usize>,
}

/// Keys are the task index plus the bit pattern of θ, so two points compare
/// equal exactly when every coordinate is bitwise identical — no tolerance
/// games, and re-evaluations of the same point are true cache hits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    task: usize,
    theta_bits: Vec<u64>,
}

fn key(task: usize, theta: &DVector<f64>) -> Key {
    Key {
        task,
        theta_bits: theta.iter().map(|x| x.to_bits()).collect(),
    }
}

#[derive(Debug, Default)]
pub struct EvalCache {
    map: HashMap<Key, CachedSolve>,
    total_iterations: usize,
}

impl EvalCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, task: usize, theta: &DVector<f64>) -> Option<&CachedSolve> {
        self.map.get(&key(task, theta))
    }

    /// Record a solve that ran `new_iterations` fresh inner iterations and
    /// left the entry in the given state.
    pub fn record(
        &mut self,
        task: usize,
        theta: &DVector<f64>,
        w: DVector<f64>,
        certificate: Option<f64>,
        new_iterations: usize,
        fixed_k: Option<usize>,
    ) {
        self.total_iterations += new_iterations;
        let k = key(task, theta);
        match self.map.get_mut(&k) {
            Some(entry) => {
                entry.w = w;
                entry.certificate = certificate;
                entry.iterations += new_iterations;
                entry.fixed_k = fixed_k;
            }
            None => {
                self.map.insert(
                    k,
                    CachedSolve {
                        w,
                        certificate,
                        iterations: new_iterations,
                        fixed_k,
                    },
                );
            }
        }
    }

    /// Sum of inner iterations over every recorded solve.
    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitwise_theta_keys_distinguish_nearby_points() {
        let mut cache = EvalCache::new();
        let a = DVector::from_vec(vec![1.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 2.0 + 1e-16]);
        cache.record(0, &a, DVector::zeros(1), Some(0.5), 10, None);
        assert!(cache.get(0, &a).is_some());
        if b != a {
            assert!(cache.get(0, &b).is_none());
        }
        assert!(cache.get(1, &a).is_none());
    }

    #[test]
    fn refinement_accumulates_iterations() {
        let mut cache = EvalCache::new();
        let theta = DVector::from_vec(vec![0.0]);
        cache.record(2, &theta, DVector::zeros(1), Some(1.0), 7, None);
        cache.record(2, &theta, DVector::zeros(1), Some(0.1), 5, None);
        let entry = cache.get(2, &theta).unwrap();
        assert_eq!(entry.iterations, 12);
        assert_eq!(entry.certificate, Some(0.1));
        assert_eq!(cache.total_iterations(), 12);
    }
}
