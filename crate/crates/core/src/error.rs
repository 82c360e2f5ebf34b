use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}:{line}: expected {expected} fields, found {found}")]
    RaggedRow {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("no labeled rows survive ({dropped} rows dropped without a net price)")]
    EmptyLabel { dropped: usize },

    #[error("cannot fit transform: {0}")]
    Fit(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("fold error: {0}")]
    Fold(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("labels have zero variance; R² is undefined")]
    DegenerateVariance,

    #[error("invalid run spec: {0}")]
    Config(String),

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("no model trained successfully")]
    NoSuccessfulRows,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for input/config problems, 3 when no
    /// model row succeeded.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoSuccessfulRows => 3,
            _ => 2,
        }
    }
}
