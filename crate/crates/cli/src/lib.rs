//! Config-driven experiment runner: chain validation, sofic reports, tower
//! construction, entropy reports and microstate counts.

pub mod commands;
pub mod config;
pub mod output;
pub mod tower_doc;

use std::fmt;

/// Exit code 1 for domain errors (bad or infeasible input), 2 for internal
/// invariant violations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Domain(String),
    Internal(String),
}

impl CliError {
    pub fn domain(msg: impl Into<String>) -> Self {
        CliError::Domain(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Domain(m) => write!(f, "error: {m}"),
            CliError::Internal(m) => write!(f, "internal error (this is a bug): {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<toeplitz_lab::Error> for CliError {
    fn from(e: toeplitz_lab::Error) -> Self {
        match e {
            toeplitz_lab::Error::Internal(_) => CliError::Internal(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}
