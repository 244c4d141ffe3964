use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown user: {0}")]
    UnknownUser(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("not enough qualifying users: requested {requested}, only {available} qualify")]
    InsufficientUsers { requested: usize, available: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable snake_case label for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Parse { .. } => "parse",
            Error::InvalidInput(_) => "invalid_input",
            Error::Domain(_) => "domain",
            Error::UnknownUser(_) => "unknown_user",
            Error::Training(_) => "training",
            Error::InsufficientUsers { .. } => "insufficient_users",
        }
    }
}
