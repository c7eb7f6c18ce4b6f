use thiserror::Error;

/// Errors produced by the solvers, estimators and I/O helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("divergence undefined: p has mass {mass} on an atom where q has none")]
    DivergenceUndefined { mass: f64 },

    #[error("sinkhorn did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("semi-dual solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    SemiDualNotConverged { iterations: usize, grad_norm: f64 },

    #[error("could not draw a Laguerre partition with balanced cells after {0} attempts")]
    CellBudgetExhausted(usize),

    #[error("malformed measure CSV at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
