use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("signal too short: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("decomposition has no detail coefficients")]
    EmptyDecomposition,

    #[error("compensation level K = {0} outside the admissible range")]
    CompensationOutOfRange(f64),

    #[error("reactance parameters must be positive (L = {l}, C = {c})")]
    NonpositiveReactance { l: f64, c: f64 },

    #[error("invalid scenario parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("amplitude calibration diverged: {0}")]
    CalibrationDiverged(String),

    #[error("non-finite value in network input")]
    NonFiniteInput,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("linear system is singular (not positive definite)")]
    SingularSystem,

    #[error("training diverged: damping reached {lambda:e} without an accepted step")]
    DivergedTraining { lambda: f64 },

    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),

    #[error("feature {index} has zero spread on the training split")]
    DegenerateFeature { index: usize },

    #[error("split fraction {0} must lie strictly between 0 and 1")]
    FractionOutOfRange(f64),

    #[error("window {start}..{end} is outside a record of {len} samples")]
    WindowOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
