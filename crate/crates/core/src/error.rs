use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("inconsistent dimensionality: row {row} has {found} columns, expected {expected}")]
    InconsistentDimensionality {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-numeric cell {cell:?} at row {row}")]
    NonNumeric { row: usize, cell: String },
    #[error("non-finite coordinate at row {row}")]
    NonFinite { row: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k = {k} is out of range for {n} points")]
    KOutOfRange { k: usize, n: usize },
    #[error("{criterion}: {reason}")]
    Undefined {
        criterion: &'static str,
        reason: String,
    },
    #[error("zero generalized variance")]
    ZeroGeneralizedVariance,
    #[error("undefined diameter: every cluster has zero diameter")]
    UndefinedDiameter,
    #[error("coincident centers {0} and {1}")]
    CoincidentCenters(usize, usize),
    #[error("profile has no assignments for k = {0}; rebuild it with assignments retained")]
    MissingAssignments(usize),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("{n} points exceed the pairwise-distance limit of {max_n}; enable subsampling")]
    TooLarge { n: usize, max_n: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn undefined(criterion: &'static str, reason: impl Into<String>) -> Self {
        Error::Undefined {
            criterion,
            reason: reason.into(),
        }
    }
}
