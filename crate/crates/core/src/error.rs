use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is singular or not positive definite (lambda_min = {lambda_min:e})")]
    Singular { lambda_min: f64 },

    #[error("infeasible spectrum: {0}")]
    InfeasibleSpectrum(String),

    #[error("client {client} violates the population assumptions: {detail}")]
    AssumptionViolated { client: usize, detail: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("iterates diverged at round {round} (norm {norm:e})")]
    Divergence { round: usize, norm: f64 },

    #[error("client {client} has no examples to sample mini-batches from")]
    EmptyExamples { client: usize },

    #[error("cannot sample {requested} clients from a population of {available}")]
    TooManyClients { requested: usize, available: usize },

    #[error("pair {index} does not commute (residual {residual:e})")]
    NonCommuting { index: usize, residual: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
