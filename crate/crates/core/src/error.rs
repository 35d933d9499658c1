use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("resource limit: need {required_bytes} bytes, cap is {cap_bytes}")]
    Resource { required_bytes: u64, cap_bytes: u64 },
    #[error("dimension {dim} exceeds dense limit {limit}; use the iterative solver")]
    OverDenseLimit { dim: usize, limit: usize },
    #[error("{n} qubits exceeds exact limit {limit}; use the sampled estimator")]
    OverExactLimit { n: usize, limit: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("rank deficient design: {0}")]
    Rank(String),
    #[error("integrity error: conflicting payload for key {0}")]
    Integrity(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
