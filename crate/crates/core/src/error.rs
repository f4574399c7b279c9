use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the codec, metric, theory and forecasting layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("non-finite value at channel {channel}, step {step}")]
    NonFinite { channel: usize, step: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("column (channel {channel}, step {step}) is not one-hot")]
    OneHotViolation { channel: usize, step: usize },

    #[error("column (channel {channel}, step {step}) is not a probability distribution")]
    NotADistribution { channel: usize, step: usize },

    #[error("malformed {kind} data: {reason}")]
    Format { kind: &'static str, reason: String },

    #[error("no sign change of the bound derivative on [{lo}, {hi}] for h = {h}")]
    NoSignChange { h: usize, lo: f64, hi: f64 },

    #[error("{path}: {reason}")]
    Csv { path: PathBuf, reason: String },

    #[error("{path}: row {row}, column {column:?}: cannot parse {cell:?} as a number")]
    BadCell {
        path: PathBuf,
        row: usize,
        column: String,
        cell: String,
    },

    #[error("window error: {0}")]
    Window(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn format(kind: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            kind,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
