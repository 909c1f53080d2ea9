use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or block structure do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid index tuple: {0}")]
    InvalidTuple(String),

    #[error(
        "exhaustive enumeration needs {required} kernel evaluations (cap {cap}); use a subsampling estimator"
    )]
    EnumerationCap { required: u128, cap: u64 },

    #[error("degenerate quantity: {0}")]
    Degenerate(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    #[error("hypothesis matrix rejected: asymmetry {asymmetry:e}, idempotence defect {idempotence:e}")]
    InvalidHypothesis { asymmetry: f64, idempotence: f64 },

    #[error("{}:{line}: {message}", path.display())]
    Ingest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::UnsupportedScenario(_) => 2,
            Error::Degenerate(_) | Error::NotPositiveDefinite { .. } => 4,
            _ => 3,
        }
    }
}
