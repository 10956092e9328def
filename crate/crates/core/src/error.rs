use thiserror::Error;

use crate::shaping::OptTrace;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("infeasible moment constraints (C0={c0}, C1={c1}, C2={c2}): {reason}")]
    Infeasible {
        c0: f64,
        c1: f64,
        c2: f64,
        reason: String,
    },

    #[error("bit position {bit} has an empty label class")]
    EmptyBitClass { bit: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("optimization diverged at epoch {epoch}")]
    Divergence { epoch: usize, trace: Box<OptTrace> },

    #[error("distribution matcher: {0}")]
    Matcher(String),

    #[error("frame: {0}")]
    Frame(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
