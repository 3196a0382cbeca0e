use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] onset_cvi::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 when the sweep produced nothing usable, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(onset_cvi::Error::SearchFailed(_)) => 2,
            _ => 1,
        }
    }
}
