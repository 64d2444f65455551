use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Fleet capacity check fails (capacity does not exceed the smallest PV total),
    /// so every DR chance constraint over the Wasserstein ball is infeasible.
    #[error("distributionally robust constraint infeasible: {0}")]
    DrInfeasible(String),
    #[error("branch is empty: {0}")]
    EmptyBranch(String),
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }
}
