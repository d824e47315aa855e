use thiserror::Error;

use crate::io::npy::NpyError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coordinate ({row}, {col}) is outside the {height}x{width} raster")]
    OutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("fold {fold}: training budget unreachable, {still_needed} labeled pixels still needed after {attempts} consecutive rejected draws")]
    BudgetUnreachable {
        fold: usize,
        still_needed: usize,
        attempts: usize,
    },

    #[error("fold {fold}: no draw covered every class within {attempts} attempts")]
    ClassCoverageUnreachable { fold: usize, attempts: usize },

    #[error("class {class} has {available} labeled pixels, {requested} requested")]
    InsufficientClassSupport {
        class: u16,
        available: usize,
        requested: usize,
    },

    #[error("degenerate comparison: all paired differences are zero")]
    DegenerateComparison,

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Npy(#[from] NpyError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
