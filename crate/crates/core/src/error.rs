use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite Crank-Nicolson coefficient at interior node {node}")]
    NonFiniteCoefficient { node: usize },

    #[error("zero pivot in tridiagonal solve at row {row}")]
    ZeroPivot { row: usize },

    #[error("forward solve failed at time index {time_index}: {source}")]
    StepFailed {
        time_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("observation point {point} lies outside [{y_min}, {y_max}]")]
    PointOutOfRange { point: f64, y_min: f64, y_max: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("jacobian column {column} failed: {source}")]
    JacobianColumn {
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "acceptance rate {rate:.4} over the first {window} steps is below {threshold}; \
         the proposal scale is likely mis-sized"
    )]
    LowAcceptance {
        rate: f64,
        window: usize,
        threshold: f64,
    },

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("run failed:\n{}", .0.join("\n"))]
    Runtime(Vec<String>),

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
