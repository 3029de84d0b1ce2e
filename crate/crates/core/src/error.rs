use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix has no rows or no columns")]
    EmptyMatrix,

    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("dispersion must be strictly positive, got {0}")]
    NonpositiveDispersion(f64),

    #[error("value must be strictly positive, got {0}")]
    NonpositiveValue(f64),

    #[error("suppression constant C must exceed 1, got {0}")]
    InvalidC(f64),

    #[error("global suppression bound needs at least 2 features, got {0}")]
    InvalidM(usize),

    #[error("objective {objective} lies outside bounds [{lower}, {upper}]")]
    BoundViolation {
        objective: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid synthetic dataset spec: {0}")]
    InvalidSpec(String),

    #[error("feature {0} is constant and cannot be range-normalised")]
    ConstantFeature(usize),

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: u64, col: usize, msg: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error beneath any added context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
