use thiserror::Error;

/// Errors raised by the model, dynamics and optimization routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("no positive equilibrium: {0}")]
    NoPositiveEquilibrium(String),

    #[error("trajectory diverged at node {node}")]
    Divergence { node: usize },

    #[error("ratio denominator vanishes at state {0}")]
    SingularPoint(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("optimization failed on every start:\n{}", .0.join("\n"))]
    OptimizationFailure(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;
