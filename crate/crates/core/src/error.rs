use thiserror::Error;

/// Parameter validation failure. The message always leads with the field name.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field} out of range: {reason}")]
pub struct ParamError {
    pub field: &'static str,
    pub reason: String,
}

impl ParamError {
    pub(crate) fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

/// Failures of the numerical solvers (value iteration, free entry, stationary flows).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("{stage}: no convergence after {iterations} iterations (last residual {residual:e})")]
    MaxIterations {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("{stage}: non-finite value encountered")]
    Divergence { stage: &'static str },
    #[error("value vector `{which}` decreases by {drop:e} at node {node}")]
    NonMonotoneValues {
        which: &'static str,
        node: usize,
        drop: f64,
    },
    #[error("free-entry residual did not change sign below tightness {theta_max:e}")]
    BracketFailure { theta_max: f64 },
    #[error("outer tightness loop stalled: residual has not decreased for {window} iterations (last {residual:e})")]
    OscillationDetected { window: usize, residual: f64 },
    #[error("state-space guard: STC renewal cap {cap} exceeds {limit}")]
    CapTooLarge { cap: u32, limit: u32 },
}
