use thiserror::Error;

/// Errors raised by the transport, tree and correlation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("plan entry ({0}, {1}) is out of bounds")]
    IndexOutOfBounds(usize, usize),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("label tree error at {path}: {reason}")]
    Tree { path: String, reason: String },

    #[error("unknown class label `{0}`")]
    UnknownClass(String),

    #[error("node {0} is not a leaf of the tree")]
    NotALeaf(usize),

    #[error("{0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
