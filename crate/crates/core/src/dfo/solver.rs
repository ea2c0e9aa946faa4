//! Derivative-free trust-region driver for the upper-level problem.
//!
//! Each outer iteration interpolates a Gauss-Newton model through m+1
//! evaluated points, takes a constrained trust-region step, and accepts or
//! rejects it on the usual actual-vs-predicted decrease test. Lower-level
//! solves are only ever as accurate as the current radius demands
//! (`ε = (c·Δ²)²`, capped): large radii tolerate sloppy solves, and as the
//! radius shrinks, previously evaluated points whose certificates no longer
//! meet the demand are re-solved in place, warm-started from their cached
//! solutions. A fixed-iteration mode runs the same outer loop with constant,
//! uncertified inner effort for comparison.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DVector;

use crate::problems::HyperPoint;

use super::cache::EvalCache;
use super::config::{ModeKind, SolverConfig};
use super::evaluate::{evaluate_point, AccuracyRequest, PointEvaluation, TaskSet};
use super::interp::{initial_simplex, update_interpolation_set, InterpolationSet, PointData};
use super::model::{build_model, GNModel};
use super::subproblem::solve_tr_subproblem;
use super::{required_accuracy, DfoError};

/// What an objective evaluation (or in-place refresh) was for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepType {
    Initial,
    TrialAccepted,
    TrialRejected,
    Geometry,
    /// In-place re-solve of an existing point after the accuracy demand
    /// tightened. Not counted against the evaluation budget; its log row
    /// repeats the last counted evaluation index.
    ReEvaluation,
}

impl StepType {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepType::Initial => "initial",
            StepType::TrialAccepted => "trial_accepted",
            StepType::TrialRejected => "trial_rejected",
            StepType::Geometry => "geometry",
            StepType::ReEvaluation => "re_evaluation",
        }
    }

    pub fn parse(s: &str) -> Option<StepType> {
        match s {
            "initial" => Some(StepType::Initial),
            "trial_accepted" => Some(StepType::TrialAccepted),
            "trial_rejected" => Some(StepType::TrialRejected),
            "geometry" => Some(StepType::Geometry),
            "re_evaluation" => Some(StepType::ReEvaluation),
            _ => None,
        }
    }
}

impl fmt::Display for StepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One objective evaluation as it appeared to the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// 1-based count of budget-counted evaluations so far; `re_evaluation`
    /// rows repeat the index of the last counted one.
    pub eval_index: usize,
    pub theta: Vec<f64>,
    pub objective: f64,
    /// Whether the evaluation carries a certified-accuracy guarantee meeting
    /// the demand at its radius (true exactly in dynamic mode).
    pub certified: bool,
    /// Total inner (proximal-gradient) iterations spent by the run up to and
    /// including this evaluation.
    pub cum_inner_iterations: usize,
    /// Trust-region radius in effect when the evaluation was requested.
    pub delta: f64,
    pub step_type: StepType,
}

pub const RUN_LOG_HEADER: &str =
    "eval_index,theta1,theta2,F,certified,cum_fista_iters,delta,step_type";

/// Chronological record of every objective evaluation in a run, serialisable
/// to CSV with lossless float formatting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    records: Vec<RunRecord>,
}

fn bad_data(detail: String) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, detail)
}

impl RunLog {
    pub fn push(&mut self, record: RunRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Counted evaluations only (everything except `re_evaluation` rows).
    pub fn counted(&self) -> impl Iterator<Item = &RunRecord> {
        self.records
            .iter()
            .filter(|r| r.step_type != StepType::ReEvaluation)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{RUN_LOG_HEADER}")?;
        for r in &self.records {
            assert_eq!(
                r.theta.len(),
                2,
                "the run-log CSV layout is fixed to two hyperparameters"
            );
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{}",
                r.eval_index,
                r.theta[0],
                r.theta[1],
                r.objective,
                r.certified,
                r.cum_inner_iterations,
                r.delta,
                r.step_type
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> std::io::Result<RunLog> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| bad_data("empty run log".into()))??;
        if header.trim() != RUN_LOG_HEADER {
            return Err(bad_data(format!("unexpected run-log header: {header:?}")));
        }
        let mut records = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 8 {
                return Err(bad_data(format!(
                    "line {}: expected 8 fields, got {}",
                    lineno + 2,
                    parts.len()
                )));
            }
            let field = |i: usize| -> Result<f64, std::io::Error> {
                parts[i]
                    .parse::<f64>()
                    .map_err(|e| bad_data(format!("line {}: {e}", lineno + 2)))
            };
            records.push(RunRecord {
                eval_index: parts[0]
                    .parse::<usize>()
                    .map_err(|e| bad_data(format!("line {}: {e}", lineno + 2)))?,
                theta: vec![field(1)?, field(2)?],
                objective: field(3)?,
                certified: match parts[4] {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(bad_data(format!(
                            "line {}: bad certified flag {other:?}",
                            lineno + 2
                        )))
                    }
                },
                cum_inner_iterations: parts[5]
                    .parse::<usize>()
                    .map_err(|e| bad_data(format!("line {}: {e}", lineno + 2)))?,
                delta: field(6)?,
                step_type: StepType::parse(parts[7]).ok_or_else(|| {
                    bad_data(format!("line {}: bad step type {:?}", lineno + 2, parts[7]))
                })?,
            });
        }
        Ok(RunLog { records })
    }
}

/// Why an evaluation's solutions were consumed by the algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsumeContext {
    /// The point fed an interpolation model.
    ModelBuild,
    /// The point was the trial of an acceptance test.
    Acceptance,
}

/// Audit record: the per-task certificates actually relied on at one point,
/// together with the radius and accuracy demand in force at consumption time.
/// The dynamic-accuracy contract is that `certificates[t] ≤ demand` whenever
/// `demand` is present.
#[derive(Debug, Clone)]
pub struct ConsumedEval {
    pub context: ConsumeContext,
    pub theta: Vec<f64>,
    pub certificates: Vec<Option<f64>>,
    pub radius: f64,
    pub demand: Option<f64>,
}

/// Trust-region constants, decoupled from the full run configuration so the
/// acceptance rule is testable on its own.
#[derive(Debug, Clone)]
pub struct TrustRegionParams {
    pub delta0: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub gamma_dec: f64,
    pub gamma_inc: f64,
    pub c: f64,
    pub eps_max: f64,
}

impl TrustRegionParams {
    pub fn from_config(config: &SolverConfig) -> Self {
        TrustRegionParams {
            delta0: config.delta0,
            delta_min: config.delta_min,
            delta_max: config.delta_max,
            eta1: config.eta1,
            eta2: config.eta2,
            gamma_dec: config.gamma_dec,
            gamma_inc: config.gamma_inc,
            c: config.c,
            eps_max: config.eps_max,
        }
    }
}

impl Default for TrustRegionParams {
    fn default() -> Self {
        TrustRegionParams::from_config(&SolverConfig::default())
    }
}

/// Mutable outer-loop state, exposed for observability in tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegionState {
    pub delta: f64,
    pub evaluations: usize,
}

/// Acceptance test and radius update. Returns `(ρ, accepted, new_radius)`;
/// fails when the predicted decrease is not a positive finite number (the
/// caller must treat such steps as stationarity, not call this).
pub fn acceptance_step(
    params: &TrustRegionParams,
    radius: f64,
    f_base: f64,
    f_trial: f64,
    predicted_decrease: f64,
) -> Result<(f64, bool, f64), DfoError> {
    if !(predicted_decrease > 0.0) || !predicted_decrease.is_finite() {
        return Err(DfoError::InvalidStep {
            decrease: predicted_decrease,
        });
    }
    let rho = (f_base - f_trial) / predicted_decrease;
    let accepted = rho >= params.eta1;
    let new_radius = if rho >= params.eta2 {
        (radius * params.gamma_inc).min(params.delta_max)
    } else if accepted {
        radius
    } else {
        radius * params.gamma_dec
    };
    Ok((rho, accepted, new_radius))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The evaluation budget is exhausted.
    EvalBudget,
    /// The radius reached its lower bound.
    RadiusMin,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best_theta: DVector<f64>,
    pub best_objective: f64,
    pub log: RunLog,
    pub consumed: Vec<ConsumedEval>,
    pub stop: StopReason,
    /// Budget-counted objective evaluations performed.
    pub evaluations: usize,
    /// Total inner iterations across all lower-level solves, refreshes
    /// included.
    pub inner_iterations: usize,
}

/// A solver error together with the partial run log, so callers can flush
/// what was measured before the failure.
#[derive(Debug)]
pub struct SolverFailure {
    pub error: DfoError,
    pub log: RunLog,
}

impl fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for SolverFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct Engine<'a, T> {
    tasks: &'a T,
    params: TrustRegionParams,
    mode: ModeKind,
    fixed_k: usize,
    budget: usize,
    lo: DVector<f64>,
    hi: DVector<f64>,
    cache: EvalCache,
    log: RunLog,
    consumed: Vec<ConsumedEval>,
    evaluations: usize,
}

fn bits_eq(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

impl<'a, T: TaskSet + Sync> Engine<'a, T> {
    fn demand(&self, delta: f64) -> Option<f64> {
        match self.mode {
            ModeKind::Dynamic => {
                Some(required_accuracy(delta, self.params.c).min(self.params.eps_max))
            }
            ModeKind::Fixed => None,
        }
    }

    fn request(&self, delta: f64) -> AccuracyRequest {
        match self.mode {
            ModeKind::Dynamic => AccuracyRequest::Certified {
                epsilon: self.demand(delta).expect("dynamic mode has a demand"),
            },
            ModeKind::Fixed => AccuracyRequest::Fixed {
                iterations: self.fixed_k,
            },
        }
    }

    fn fail(&mut self, error: DfoError) -> Box<SolverFailure> {
        Box::new(SolverFailure {
            error,
            log: std::mem::take(&mut self.log),
        })
    }

    fn in_box(&self, theta: &DVector<f64>) -> bool {
        (0..theta.len()).all(|i| theta[i] >= self.lo[i] && theta[i] <= self.hi[i])
    }

    fn clip(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(theta.len(), |i, _| theta[i].clamp(self.lo[i], self.hi[i]))
    }

    /// Budget-counted objective evaluation. Does not write a log row — the
    /// caller does, once it knows the step type.
    fn evaluate(&mut self, theta: &DVector<f64>, delta: f64) -> Result<PointData, DfoError> {
        let request = self.request(delta);
        let eval = evaluate_point(self.tasks, theta, &request, &mut self.cache)?;
        self.evaluations += 1;
        Ok(to_point_data(eval))
    }

    /// Un-counted in-place refresh at a tightened demand.
    fn refresh(&mut self, theta: &DVector<f64>, delta: f64) -> Result<PointData, DfoError> {
        let request = self.request(delta);
        let eval = evaluate_point(self.tasks, theta, &request, &mut self.cache)?;
        Ok(to_point_data(eval))
    }

    fn log_row(&mut self, theta: &DVector<f64>, objective: f64, delta: f64, step: StepType) {
        self.log.push(RunRecord {
            eval_index: self.evaluations,
            theta: theta.iter().copied().collect(),
            objective,
            certified: self.mode == ModeKind::Dynamic,
            cum_inner_iterations: self.cache.total_iterations(),
            delta,
            step_type: step,
        });
    }

    fn record_consumed(&mut self, context: ConsumeContext, theta: &DVector<f64>, certificates: Vec<Option<f64>>, delta: f64) {
        self.consumed.push(ConsumedEval {
            context,
            theta: theta.iter().copied().collect(),
            certificates,
            radius: delta,
            demand: self.demand(delta),
        });
    }

    /// Recover from a degenerate interpolation set. The cheap move first:
    /// evaluate one fresh point a full radius along the set's least-informed
    /// direction and swap it for the point farthest from the base. If the
    /// rebuilt model is still degenerate — the set can collapse in more than
    /// one direction at once — rebuild the whole set as a coordinate simplex
    /// around the base, reusing the base's data. Every fresh point is a
    /// budget-counted `geometry` evaluation; returns `Ok(None)` when the
    /// budget runs out mid-repair (the set is left in a usable state).
    fn repair_geometry(
        &mut self,
        set: &mut InterpolationSet,
        delta: f64,
    ) -> Result<Option<GNModel>, Box<SolverFailure>> {
        if self.evaluations >= self.budget {
            return Ok(None);
        }
        let base = set.base_point().clone();
        let dir = set.repair_direction();
        let mut candidate = &base + &dir * delta;
        if !self.in_box(&candidate) {
            candidate = &base - &dir * delta;
        }
        if !self.in_box(&candidate) {
            candidate = self.clip(&(&base + &dir * delta));
        }
        if bits_eq(&candidate, &base) {
            candidate = self.clip(&(&base - &dir * delta));
        }
        if !bits_eq(&candidate, &base) {
            let pd = match self.evaluate(&candidate, delta) {
                Ok(pd) => pd,
                Err(e) => return Err(self.fail(e)),
            };
            self.log_row(&candidate, pd.objective, delta, StepType::Geometry);
            let victim = set.farthest_from_base();
            set.replace(victim, candidate, pd);
            match build_model(set) {
                Ok(m) => return Ok(Some(m)),
                Err(DfoError::DegenerateGeometry { .. }) => {}
                Err(e) => return Err(self.fail(e)),
            }
        }
        // Full reset. The spacing is capped at half the narrowest box width
        // so the simplex can always flip inside the box from any interior
        // base point.
        let min_width = (0..base.len())
            .map(|i| self.hi[i] - self.lo[i])
            .fold(f64::INFINITY, f64::min);
        let spacing = delta.min(0.5 * min_width);
        let fresh = match initial_simplex(&base, spacing, &self.lo, &self.hi) {
            Ok(p) => p,
            Err(e) => return Err(self.fail(e)),
        };
        let mut points = vec![base.clone()];
        let mut data = vec![set.base_data().clone()];
        for p in fresh.into_iter().skip(1) {
            if self.evaluations >= self.budget {
                return Ok(None);
            }
            let pd = match self.evaluate(&p, delta) {
                Ok(pd) => pd,
                Err(e) => return Err(self.fail(e)),
            };
            self.log_row(&p, pd.objective, delta, StepType::Geometry);
            points.push(p);
            data.push(pd);
        }
        *set = InterpolationSet::new(points, data);
        match build_model(set) {
            Ok(m) => Ok(Some(m)),
            Err(e) => Err(self.fail(e)),
        }
    }

    fn outcome(self, set: &InterpolationSet, stop: StopReason) -> RunOutcome {
        let best = set.best_index();
        RunOutcome {
            best_theta: set.point(best).clone(),
            best_objective: set.data(best).objective,
            log: self.log,
            consumed: self.consumed,
            stop,
            evaluations: self.evaluations,
            inner_iterations: self.cache.total_iterations(),
        }
    }

    fn run(mut self, theta0: &DVector<f64>) -> Result<RunOutcome, Box<SolverFailure>> {
        if self.budget == 0 {
            let err = DfoError::BadConfig("eval_budget must be at least 1".into());
            return Err(self.fail(err));
        }
        let mut delta = self.params.delta0;
        let points = match initial_simplex(theta0, delta, &self.lo, &self.hi) {
            Ok(p) => p,
            Err(e) => return Err(self.fail(e)),
        };
        let mut data = Vec::with_capacity(points.len());
        for p in &points {
            if self.evaluations >= self.budget {
                break;
            }
            let pd = match self.evaluate(p, delta) {
                Ok(pd) => pd,
                Err(e) => return Err(self.fail(e)),
            };
            self.log_row(p, pd.objective, delta, StepType::Initial);
            data.push(pd);
        }
        if data.len() < points.len() {
            // Budget died during initialisation; report the best of what ran.
            let truncated = points[..data.len()].to_vec();
            let set = InterpolationSet::new(truncated, data);
            return Ok(self.outcome(&set, StopReason::EvalBudget));
        }
        let mut set = InterpolationSet::new(points, data);

        let stop = loop {
            if delta <= self.params.delta_min {
                break StopReason::RadiusMin;
            }
            if self.evaluations >= self.budget {
                break StopReason::EvalBudget;
            }

            // Stale solutions: any point whose certificates no longer meet
            // the current demand is re-solved in place (warm-started through
            // the cache) before the model is trusted.
            if self.mode == ModeKind::Dynamic {
                let eps = self.demand(delta).expect("dynamic mode has a demand");
                for i in 0..set.len() {
                    let stale = set
                        .data(i)
                        .certificates
                        .iter()
                        .any(|c| c.map_or(true, |v| v > eps));
                    if stale {
                        let theta_i = set.point(i).clone();
                        let pd = match self.refresh(&theta_i, delta) {
                            Ok(pd) => pd,
                            Err(e) => return Err(self.fail(e)),
                        };
                        self.log_row(&theta_i, pd.objective, delta, StepType::ReEvaluation);
                        set.set_data(i, pd);
                    }
                }
            }

            // Model build, repairing the geometry if the set has collapsed.
            let model = match build_model(&set) {
                Ok(m) => m,
                Err(DfoError::DegenerateGeometry { .. }) => {
                    match self.repair_geometry(&mut set, delta)? {
                        Some(m) => m,
                        None => break StopReason::EvalBudget,
                    }
                }
                Err(e) => return Err(self.fail(e)),
            };
            for i in 0..set.len() {
                let certs = set.data(i).certificates.clone();
                let theta_i = set.point(i).clone();
                self.record_consumed(ConsumeContext::ModelBuild, &theta_i, certs, delta);
            }

            let (step, decrease) = solve_tr_subproblem(&model, delta, &self.lo, &self.hi);
            let f_base = set.base_data().objective;
            // Below this the model is stationary at the current radius; the
            // quotient ρ would be numerically meaningless. Shrink silently.
            let floor = f64::EPSILON * (1.0 + f_base.abs());
            if !(decrease > floor) {
                delta *= self.params.gamma_dec;
                continue;
            }
            if self.evaluations >= self.budget {
                break StopReason::EvalBudget;
            }
            let trial = self.clip(&(model.base() + &step));
            if bits_eq(&trial, set.base_point()) {
                delta *= self.params.gamma_dec;
                continue;
            }
            let pd = match self.evaluate(&trial, delta) {
                Ok(pd) => pd,
                Err(e) => return Err(self.fail(e)),
            };
            self.record_consumed(
                ConsumeContext::Acceptance,
                &trial,
                pd.certificates.clone(),
                delta,
            );
            let (_rho, accepted, new_delta) =
                match acceptance_step(&self.params, delta, f_base, pd.objective, decrease) {
                    Ok(r) => r,
                    Err(e) => return Err(self.fail(e)),
                };
            let step_type = if accepted {
                StepType::TrialAccepted
            } else {
                StepType::TrialRejected
            };
            self.log_row(&trial, pd.objective, delta, step_type);
            update_interpolation_set(&mut set, trial, pd, accepted);
            delta = new_delta;
        };

        Ok(self.outcome(&set, stop))
    }
}

fn to_point_data(eval: PointEvaluation) -> PointData {
    PointData {
        objective: eval.residuals.objective,
        residuals: eval.residuals.stacked(),
        certificates: eval.certificates,
    }
}

/// Run the trust-region solver as described by `config` against `tasks`.
/// Deterministic: identical inputs produce bitwise-identical outcomes.
pub fn run_solver<T: TaskSet + Sync>(
    tasks: &T,
    config: &SolverConfig,
) -> Result<RunOutcome, Box<SolverFailure>> {
    if let Err(e) = config.validate() {
        return Err(Box::new(SolverFailure {
            error: DfoError::BadConfig(e.to_string()),
            log: RunLog::default(),
        }));
    }
    let theta0 = DVector::from_row_slice(&config.theta0);
    let lo = DVector::from_row_slice(&config.bounds_lo);
    let hi = DVector::from_row_slice(&config.bounds_hi);
    if let Err(e) = HyperPoint::new(theta0.clone(), lo.clone(), hi.clone()) {
        return Err(Box::new(SolverFailure {
            error: DfoError::from(e),
            log: RunLog::default(),
        }));
    }
    let engine = Engine {
        tasks,
        params: TrustRegionParams::from_config(config),
        mode: config.mode,
        fixed_k: config.fixed_k,
        budget: config.eval_budget,
        lo,
        hi,
        cache: EvalCache::new(),
        log: RunLog::default(),
        consumed: Vec::new(),
        evaluations: 0,
    };
    engine.run(&theta0)
}
