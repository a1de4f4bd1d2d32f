use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("matrix is singular or ill-conditioned: {0}")]
    SingularMatrix(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("column {column} is constant (standard deviation {std:e})")]
    DegenerateColumn { column: usize, std: f64 },

    #[error("sample is degenerate: {0}")]
    DegenerateSample(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient rank: {0}")]
    InsufficientRank(String),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("format error in {}: {msg}", path.display())]
    FormatError { path: PathBuf, msg: String },

    #[error("parse error in {} at line {line}: {msg}", path.display())]
    ParseError {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}
