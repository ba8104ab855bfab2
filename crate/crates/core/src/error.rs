use thiserror::Error;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmdfaError {
    /// Input outside the model's domain (bad loadings, zero entries, bad dimension).
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation was called on a model in the wrong dominance regime.
    #[error("regime error: {0}")]
    Regime(String),

    /// Root finding or the eigensolver did not converge.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// The certificate construction produced an invalid matrix.
    #[error("construction error: {0}")]
    Construction(String),

    /// A computed quantity failed a post-condition check.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The brute-force search found no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, CmdfaError>;
