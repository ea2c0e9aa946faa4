//! Derivative-free trust-region search over the hyperparameter box.
//!
//! Each outer iteration: (1) interpolate the stacked upper-level residuals
//! linearly through `m+1` points and square them into a Gauss–Newton model,
//! (2) minimise the model inside the trust region (intersected with the box),
//! (3) evaluate the candidate and accept/reject by the usual ratio test,
//! (4) swap the candidate into the interpolation set in place of the point
//! farthest from the new iterate.
//!
//! The twist is dynamic accuracy: every function value comes from an inexact
//! lower-level solve, and the solver demands certified accuracy
//! `‖w - ŵ‖ ≤ c·Δ²` — loose while the trust region is wide, tightening as it
//! shrinks. Cached solves are warm-started when demands tighten, and stale
//! certificates trigger re-solves rather than budget-counted evaluations.

mod cache;
mod config;
mod evaluate;
mod interp;
mod model;
mod solver;
mod subproblem;

pub use cache::{CachedSolve, EvalCache};
pub use config::{ConfigError, ModeKind, SolverConfig};
pub use evaluate::{
    evaluate_point, AccuracyRequest, ElasticNetObjective, EvalError, PointEvaluation, TaskSet,
    TaskSolve,
};
pub use interp::{initial_simplex, update_interpolation_set, InterpolationSet, PointData};
pub use model::{build_model, GNModel};
pub use solver::{
    acceptance_step, run_solver, ConsumeContext, ConsumedEval, RunLog, RunOutcome, RunRecord,
    SolverFailure, StepType, StopReason, TrustRegionParams, TrustRegionState, RUN_LOG_HEADER,
};
pub use subproblem::solve_tr_subproblem;

use thiserror::Error;

/// Lower-level accuracy demanded at trust-region radius `radius`:
/// `ε = (c·radius²)²`, a bound on the squared distance `‖w - ŵ‖²`.
pub fn required_accuracy(radius: f64, c: f64) -> f64 {
    let d = c * radius * radius;
    d * d
}

#[derive(Debug, Error)]
pub enum DfoError {
    #[error("box too small to host an affinely independent interpolation set around {at:?}")]
    InfeasibleGeometry { at: Vec<f64> },
    #[error("interpolation set degenerate (difference-matrix condition {condition:e})")]
    DegenerateGeometry { condition: f64 },
    #[error("trust-region step has nonpositive predicted decrease {decrease:e}")]
    InvalidStep { decrease: f64 },
    #[error("starting point lies outside the bounds")]
    StartOutOfBounds(#[from] crate::problems::ProblemError),
    #[error("lower-level solve failed on task {task}: {source}")]
    Lower {
        task: usize,
        #[source]
        source: crate::composite::SolveError,
    },
    #[error("configuration invalid: {0}")]
    BadConfig(String),
}

impl From<EvalError> for DfoError {
    fn from(e: EvalError) -> Self {
        DfoError::Lower {
            task: e.task,
            source: e.source,
        }
    }
}
