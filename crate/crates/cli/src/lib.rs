//! Command implementations behind the `visco` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod presets;

use std::fmt;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Certificate(String),
    BlowUp(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Certificate(_) => 3,
            CliError::BlowUp(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Certificate(m) => write!(f, "check failed: {m}"),
            CliError::BlowUp(m) => write!(f, "numerical blow-up: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<visco_core::Error> for CliError {
    fn from(e: visco_core::Error) -> Self {
        use visco_core::Error as E;
        match e {
            E::InvalidGrid(_) | E::InvalidParameter(_) | E::Infeasible(_) => CliError::Config(e.to_string()),
            E::BlowUp { .. } | E::Cfl { .. } => CliError::BlowUp(e.to_string()),
            E::NotAdmissible { .. } => CliError::Certificate(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
