use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { solver: &'static str, iterations: usize, residual: f64 },
    #[error("{solver} broke down at iteration {iteration}")]
    Breakdown { solver: &'static str, iteration: usize },
    #[error("right-hand side is not orthogonal to the nullspace (relative defect {defect:e})")]
    IncompatibleRhs { defect: f64 },
    #[error("divergence {divergence:e} after correction exceeds {limit:e}")]
    DivergenceNotControlled { divergence: f64, limit: f64 },
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
