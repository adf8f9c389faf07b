use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An internal consistency check failed (non-Hermitian input, disagreeing code paths).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// The SDP solver stopped before certifying the requested gap.
    #[error("solver did not converge: {message} (best objective {best_objective}, gap {gap})")]
    Solver {
        message: String,
        best_objective: f64,
        gap: f64,
    },

    /// The SDP constraints admit no feasible point.
    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
