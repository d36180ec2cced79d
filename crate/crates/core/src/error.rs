//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, OpeError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpeError {
    /// The target policy puts mass on an action the (augmented) behavior policy never takes.
    #[error("coverage violation at context {context}, action {action}: target probability {target} with zero behavior probability")]
    CoverageViolation {
        context: usize,
        action: usize,
        target: f64,
    },

    #[error("weights of sample {sample} sum to {sum}, expected 1")]
    WeightSumViolation { sample: usize, sum: f64 },

    #[error("cell (context {context}, action {action}) has entries but zero total weight")]
    ZeroWeightCell { context: usize, action: usize },

    #[error("cell (context {context}, action {action}) is required by the target policy but has zero visit probability")]
    RealizabilityViolation { context: usize, action: usize },

    #[error("invalid probability vector for {what}: {reason}")]
    InvalidDistribution { what: String, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O failure on {path}: {reason}")]
    Io { path: String, reason: String },

    #[error("parse failure: {0}")]
    Parse(String),
}

impl OpeError {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        OpeError::Io {
            path: path.display().to_string(),
            reason: err.to_string(),
        }
    }
}
