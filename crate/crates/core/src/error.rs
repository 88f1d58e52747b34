use thiserror::Error;

use crate::harness::SweepTable;
use crate::timestepper::RunFailure;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} in `{field}` at (i = {i}, j = {j})")]
    NonFinite {
        field: String,
        i: usize,
        j: usize,
        value: f64,
    },

    #[error("grid mismatch: expected n = {expected_n}, L = {expected_len}; got n = {n}, L = {len}")]
    GridMismatch {
        expected_n: usize,
        expected_len: f64,
        n: usize,
        len: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time step {dt} exceeds the stability bound {bound}")]
    UnstableStep { dt: f64, bound: f64 },

    #[error("step {step} (t = {time}): {source}")]
    StepFailed {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("run failed after {} good steps: {}", .0.steps_completed, .0.cause)]
    RunFailed(Box<RunFailure>),

    #[error("diagnostics window holds {0} records, at least 3 are required")]
    WindowTooShort(usize),

    #[error("sweep member {index} ({parameter} = {value}) failed: {source}")]
    SweepMemberFailed {
        index: usize,
        parameter: &'static str,
        value: f64,
        #[source]
        source: Box<Error>,
        /// Distances among the members that completed before `index`.
        partial: Box<SweepTable>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
