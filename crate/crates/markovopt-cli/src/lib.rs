//! Experiment harness around the `markovopt` library: preset experiment
//! configurations, seeded (method, seed) runs with CSV persistence, seed
//! aggregation with confidence intervals, and CLI-facing invariant suites.

pub mod config;
pub mod runner;
pub mod summarize;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("malformed csv: {0}")]
    MalformedCsv(String),

    #[error(transparent)]
    Lib(#[from] markovopt::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// CLI exit code: 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
