use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),

    #[error("no records to report")]
    EmptyReport,

    #[error(transparent)]
    Core(#[from] hankel_id::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit code: 1 config, 2 runtime, 3 report on empty input.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 1,
            BenchError::EmptyReport => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
