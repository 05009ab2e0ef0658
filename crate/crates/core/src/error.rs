use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("grid too coarse: M = {0}, need at least 64")]
    GridTooCoarse(usize),

    #[error("grid size {0} is not a power of two")]
    NonPowerOfTwoGrid(usize),

    #[error("compute budget exhausted: scale N = {needed} exceeds budget {budget}")]
    BudgetExhausted { needed: u64, budget: u64 },

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
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
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
