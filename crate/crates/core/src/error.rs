use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The operation needs data that is not attached (e.g. ground-truth labels).
    #[error("invalid state: {0}")]
    State(String),

    /// A cluster ended up without members in the best restart.
    #[error("empty cluster {cluster} for k={k}")]
    EmptyCluster { k: usize, cluster: usize },

    #[error("degenerate onsets: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("stream error: {0}")]
    Stream(String),

    #[error("search failed: {0}")]
    SearchFailed(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
