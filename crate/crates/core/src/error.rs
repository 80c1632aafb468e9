use thiserror::Error;

use crate::geometry::GeometryError;

/// Errors produced by estimation, bandwidth selection, and data handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error("bandwidth must be positive")]
    NonpositiveBandwidth,

    #[error("no observations with positive weight on each side of the boundary")]
    EmptyWindow,

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("bias-correction order q={q} must exceed estimation order p={p}")]
    OrderNotGreater { p: usize, q: usize },

    #[error("pilot fit degenerate: {0}")]
    PilotDegenerate(String),

    #[error("all aggregation weights are zero")]
    AllWeightsZero,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-finite value at line {line}")]
    NonFinite { line: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateDesign(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
