//! Time-stepping driver with diagnostics and snapshot scheduling.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{compute_record, DiagnosticsRecord, RadiusEstimator};
use crate::error::{Error, Result};
use crate::grid::RealField;
use crate::model::{ModelParams, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    MaxSteps,
    Extinction,
    Divergence,
}

#[derive(Debug, Clone)]
pub struct RunState {
    pub u: RealField,
    pub step_index: u64,
    pub time: f64,
    pub halted: Option<HaltReason>,
}

impl RunState {
    pub fn new(u: RealField) -> Self {
        RunState {
            u,
            step_index: 0,
            time: 0.0,
            halted: None,
        }
    }

    /// State resumed at `step_index`; time is recomputed from the index.
    pub fn resume(u: RealField, step_index: u64, dt: f64) -> Self {
        RunState {
            u,
            step_index,
            time: step_index as f64 * dt,
            halted: None,
        }
    }
}

pub const DEFAULT_EXTINCTION_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub params: ModelParams,
    pub steps: u64,
    pub diag_every: u64,
    pub snapshot_every: u64,
    pub extinction_threshold: f64,
    pub estimator: RadiusEstimator,
}

impl RunPlan {
    pub fn new(params: ModelParams, steps: u64, diag_every: u64) -> Self {
        RunPlan {
            params,
            steps,
            diag_every,
            snapshot_every: u64::MAX,
            extinction_threshold: DEFAULT_EXTINCTION_THRESHOLD,
            estimator: RadiusEstimator::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.diag_every == 0 || self.snapshot_every == 0 {
            return Err(Error::Precondition("steps and strides must be at least 1".into()));
        }
        if !(self.extinction_threshold >= 0.0) {
            return Err(Error::Precondition("extinction threshold must be nonnegative".into()));
        }
        self.params.validate()
    }
}

/// Receives records and snapshots synchronously, in step order.
pub trait DiagnosticsSink {
    fn record(&mut self, record: &DiagnosticsRecord) -> Result<()>;

    fn snapshot(&mut self, _u: &RealField, _step: u64, _time: f64) -> Result<()> {
        Ok(())
    }
}

impl DiagnosticsSink for Vec<DiagnosticsRecord> {
    fn record(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        self.push(*record);
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl DiagnosticsSink for NullSink {
    fn record(&mut self, _record: &DiagnosticsRecord) -> Result<()> {
        Ok(())
    }
}

pub fn run(u0: RealField, plan: &RunPlan, sink: &mut dyn DiagnosticsSink) -> Result<RunState> {
    run_from(RunState::new(u0), plan, sink)
}

/// Advances `state` by up to `plan.steps` steps. Records and snapshots are
/// taken at absolute step indices that are multiples of the strides; the
/// starting state is recorded only at index 0, and the final state is
/// always recorded.
pub fn run_from(mut state: RunState, plan: &RunPlan, sink: &mut dyn DiagnosticsSink) -> Result<RunState> {
    plan.validate()?;
    let params = plan.params;
    let mut stepper = Stepper::new(state.u.grid(), params)?;
    let end = state.step_index + plan.steps;
    state.halted = None;
    state.time = state.step_index as f64 * params.dt;

    let mut last_recorded = None;
    let mut clipped = 0;
    if state.step_index == 0 {
        if emit(&state, plan, sink, clipped, &mut last_recorded)? {
            state.halted = Some(HaltReason::Extinction);
            return Ok(state);
        }
        if plan.snapshot_every != u64::MAX {
            sink.snapshot(&state.u, 0, 0.0)?;
        }
    }

    while state.step_index < end {
        let next = state.step_index + 1;
        match stepper.advance(&mut state.u, next) {
            Ok(info) => clipped = info.clipped,
            Err(Error::Divergence { .. }) => {
                state.halted = Some(HaltReason::Divergence);
                let _ = emit(&state, plan, sink, clipped, &mut last_recorded);
                return Ok(state);
            }
            Err(e) => return Err(e),
        }
        state.step_index = next;
        state.time = next as f64 * params.dt;
        if next % plan.diag_every == 0 && emit(&state, plan, sink, clipped, &mut last_recorded)? {
            state.halted = Some(HaltReason::Extinction);
            return Ok(state);
        }
        if next % plan.snapshot_every == 0 {
            sink.snapshot(&state.u, next, state.time)?;
        }
    }
    if emit(&state, plan, sink, clipped, &mut last_recorded)? {
        state.halted = Some(HaltReason::Extinction);
    } else {
        state.halted = Some(HaltReason::MaxSteps);
    }
    Ok(state)
}

/// Records the state unless it was just recorded; reports extinction.
fn emit(
    state: &RunState,
    plan: &RunPlan,
    sink: &mut dyn DiagnosticsSink,
    clipped: usize,
    last: &mut Option<u64>,
) -> Result<bool> {
    let extinct = state.u.max() < plan.extinction_threshold;
    if *last == Some(state.step_index) {
        return Ok(extinct);
    }
    let record = compute_record(&state.u, &plan.params, state.step_index, plan.estimator, clipped)?;
    sink.record(&record)?;
    *last = Some(state.step_index);
    Ok(extinct)
}
