//! Command-line front end for Bragg-cavity walk simulations.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 resource budget
//! exceeded, 4 runtime numeric or output error.

pub mod commands;
pub mod config;
pub mod output;

use bragg_walk::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Resource(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Resource(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

/// Exit class of a library error; sweep errors take the class of their cause.
fn classify(e: &Error) -> fn(String) -> CliError {
    match e {
        Error::BudgetExceeded(_) => CliError::Resource,
        Error::NonFinite { .. } | Error::Analysis(_) | Error::Checkpoint(_) => CliError::Runtime,
        Error::Sweep { source, .. } => classify(source),
        _ => CliError::Config,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let make = classify(&e);
        make(e.to_string())
    }
}
