//! Crate-wide error type.
//!
//! The numerical operations distinguish bad inputs (dimension mismatches,
//! out-of-range parameters), genuine singularities (evaluation of a
//! homogeneous quantity at the origin), declared capability bounds
//! (unsupported sphere dimension, non-decaying sharp-product operands), and
//! accuracy failures where a refinement or extrapolation did not converge.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("singularity: evaluation at the origin of a homogeneous-tail quantity")]
    OriginSingularity,

    #[error("capability error: {0}")]
    Capability(String),

    #[error("accuracy error in {context}: last two estimates {last:.3e}, {prev:.3e}")]
    Accuracy {
        context: String,
        last: f64,
        prev: f64,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("unknown symbol '{0}'")]
    UnknownSymbol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
