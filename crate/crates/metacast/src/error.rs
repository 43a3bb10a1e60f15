//! Error type shared by every module.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// CSV or config file could not be parsed. Row numbers are 1-based and
    /// include the header line.
    #[error("{path}: row {row}, column {col}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("series {id}: {msg}")]
    Series { id: String, msg: String },

    #[error("duplicate series id {0}")]
    DuplicateId(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("unknown model id {0}")]
    UnknownModel(String),

    #[error("{0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    /// Short machine-parsable category used as `error: <code>: <message>`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::Numeric(_) => "numeric",
            _ => "data",
        }
    }

    /// Process exit code: 1 usage, 2 data error, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "usage" => 1,
            "numeric" => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
