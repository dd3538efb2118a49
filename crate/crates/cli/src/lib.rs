//! Scenario-driven front end for the `mosquito-release` solver.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error,
//! 3 integration divergence, 4 optimization failure, 5 bound violation
//! under `--strict`.

pub mod commands;
pub mod config;
pub mod plot;

use std::path::PathBuf;

pub use commands::{check, equilibria, optimize, simulate};
pub use config::ScenarioConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("integration diverged: {0}")]
    Divergence(String),
    #[error("optimization failed:\n  {}", .0.join("\n  "))]
    Optimization(Vec<String>),
    #[error("{0} trajectory bound violation(s)")]
    BoundViolations(usize),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(mosquito_release::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Optimization(_) => 4,
            CliError::BoundViolations(_) => 5,
            CliError::Io { .. } | CliError::Solver(_) => 1,
        }
    }
}

impl From<mosquito_release::Error> for CliError {
    fn from(e: mosquito_release::Error) -> Self {
        use mosquito_release::Error as E;
        match e {
            E::Divergence { .. } => CliError::Divergence(e.to_string()),
            E::OptimizationFailure(logs) => CliError::Optimization(logs),
            E::InvalidParameter { .. }
            | E::InvalidConstraint(_)
            | E::InvalidGrid(_)
            | E::InvalidState(_)
            | E::NoPositiveEquilibrium(_) => CliError::Config(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}
