use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A polynomial term produced a non-finite value.
    #[error("overflow in transformation {spec_id}, feature {feature}: {detail}")]
    Overflow {
        spec_id: usize,
        feature: usize,
        detail: String,
    },

    /// Overflow while applying a transformation to one row of a batch.
    #[error("row {row}: {source}")]
    RowOverflow {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("selection round {round}: all {candidates} candidate transformations overflowed")]
    SelectionFailure { round: usize, candidates: usize },

    #[error("training diverged at epoch {epoch}, batch {batch} (loss = {loss})")]
    TrainingDivergence { epoch: usize, batch: usize, loss: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("malformed model file (line {line}): {reason}")]
    MalformedModel { line: usize, reason: String },

    #[error("unsupported model version {found:?} (expected {expected:?})")]
    VersionMismatch { found: String, expected: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for overflow raised while applying a transformation, at any nesting.
    pub fn is_overflow(&self) -> bool {
        match self {
            Error::Overflow { .. } => true,
            Error::RowOverflow { source, .. } | Error::Stage { source, .. } => source.is_overflow(),
            _ => false,
        }
    }
}
