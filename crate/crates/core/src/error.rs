use std::path::PathBuf;

use thiserror::Error;

use crate::clean::CleanReport;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("matrix is not symmetric at ({i},{j}): {a} != {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("query budget of {budget} entries exhausted")]
    BudgetExhausted { budget: u64 },

    #[error("input is not clean: {0:?}")]
    NotClean(CleanReport),

    #[error("n = {n} exceeds the enumeration cap of {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("instance provenance missing or wrong: expected {expected}")]
    ProvenanceMissing { expected: &'static str },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
