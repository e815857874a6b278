use thiserror::Error;

/// Errors raised by meshing, assembly, solves and the optimization layer.
#[derive(Debug, Error)]
pub enum PfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("not found: {0}")]
    NotFound(String),

    /// The factorization broke down. `rcond` is the reciprocal condition
    /// estimate (0 when the structure itself is singular).
    #[error("singular system ({context}): rcond estimate {rcond:e}")]
    SingularSystem { context: String, rcond: f64 },

    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PfError>;

pub(crate) fn invalid(msg: impl Into<String>) -> PfError {
    PfError::InvalidArgument(msg.into())
}
