use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: no data rows")]
    NoDataRows { path: PathBuf },

    #[error("{path}: line {line}, column `{column}`: cannot parse cell {value:?}")]
    UnparseableCell {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },

    #[error("{path}: line {line}: {message}")]
    Malformed { path: PathBuf, line: u64, message: String },

    #[error("{path}: label column `{column}` not found in header")]
    MissingLabelColumn { path: PathBuf, column: String },

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("rank-deficient input: requested {requested} dimensions but achievable rank is {achievable}")]
    RankDeficient { requested: usize, achievable: usize },

    #[error("{features} features exceed the exact coalition cap of {cap}; sampling approximations are not supported")]
    CoalitionCap { features: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed document: {0}")]
    Document(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::NoDataRows { .. }
            | Error::UnparseableCell { .. }
            | Error::Malformed { .. }
            | Error::MissingLabelColumn { .. }
            | Error::MissingColumn(_)
            | Error::Document(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::CoalitionCap { .. } => {
                ErrorKind::Config
            }
            Error::RankDeficient { .. } | Error::Numerical(_) => ErrorKind::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
