//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown entity: {0}")]
    UnknownEntity(String),
    #[error("state error: {0}")]
    State(String),
    #[error("formula error: {0}")]
    Formula(String),
    #[error("malformed act: {0}")]
    MalformedAct(String),
    #[error("lexicon error: {0}")]
    Lexicon(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    /// True for runtime numerical failures (exit code 2 in the CLI);
    /// everything else is a config/schema/data failure (exit code 1).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
