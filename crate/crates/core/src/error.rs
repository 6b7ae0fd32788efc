use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("malformed file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("truncated file {}: expected {expected} bytes, found {actual}", path.display())]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("id `{0}` not found")]
    MissingId(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("k = {k} is not valid for {n} candidates")]
    InvalidK { k: usize, n: usize },

    #[error("image error: {0}")]
    Image(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("split cannot be constructed: {0}")]
    Unsatisfiable(String),

    #[error("grid cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_cell(self, cell: impl Into<String>) -> Self {
        Error::Cell {
            cell: cell.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad inputs or configuration rather than by a
    /// failure during computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_)
            | Error::Format { .. }
            | Error::Truncated { .. }
            | Error::MissingId(_)
            | Error::DuplicateId(_)
            | Error::DimMismatch { .. }
            | Error::InvalidK { .. }
            | Error::Json(_) => true,
            Error::Cell { source, .. } => source.is_validation(),
            Error::Io { .. } | Error::Image(_) | Error::Numerical(_) | Error::Unsatisfiable(_) => {
                false
            }
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::Error::Validation(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
