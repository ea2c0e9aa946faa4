//! Bilevel hyperparameter tuning built on certified lower-level solves.
//!
//! The crate is organised around four pieces:
//!
//! * [`composite`] — an accelerated proximal-gradient solver for strongly
//!   convex composite objectives `f + g`, with computable accuracy
//!   certificates that bound the distance to the minimizer.
//! * [`problems`] — concrete instances: elastic-net regularised logistic
//!   regression tasks, an l1/l2-regularised least-squares instance, and the
//!   upper-level residual assembly used by the tuner.
//! * [`dfo`] — a derivative-free trust-region solver over the hyperparameter
//!   box that demands lower-level accuracy proportional to the squared
//!   trust-region radius.
//! * [`data`] — IDX image/label ingestion, binary task construction and the
//!   deterministic synthetic dataset used by the test suites.
//!
//! [`oracles`] holds slow, independent reference implementations (plain
//! proximal gradient, grid searches, finite differences) used to validate the
//! fast paths; nothing in the library proper depends on it.

pub mod composite;
pub mod data;
pub mod dfo;
pub mod oracles;
pub mod problems;

pub use composite::{
    fista_solve, fista_solve_observed, momentum_step, prox_l1, subgradient_certificate,
    CompositeProblem, LowerSolution, SolveError, Termination, TerminationMode,
};
pub use dfo::{
    evaluate_point, required_accuracy, run_solver, AccuracyRequest, EvalCache, RunLog, RunOutcome,
    SolverConfig, TaskSet,
};
pub use problems::{BinaryTask, HyperPoint, UpperResiduals};
