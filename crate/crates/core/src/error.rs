use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A value is not representable as a finite `f64`.
    #[error("range error: {0}")]
    Range(String),

    /// The grid does not extend far enough below a point to evaluate a difference.
    #[error("boundary error: {0}")]
    Boundary(String),

    /// Mismatched or malformed arguments (grid mismatch, bad index order...).
    #[error("argument error: {0}")]
    Argument(String),

    /// A series is outside its convergence domain, or its terms stopped shrinking.
    #[error("divergence: observed term ratio {ratio:.6e} ({context})")]
    Divergence { ratio: f64, context: String },

    /// An iteration hit its cap before reaching the requested tolerance.
    #[error("no convergence after {iterations} iterations (last change {last_delta:.3e})")]
    NotConverged { iterations: usize, last_delta: f64 },

    /// The scalar implicit solve at one grid point failed.
    #[error("step failed at grid index {index}: {reason}")]
    Step { index: usize, reason: String },

    /// A hypothesis of a theorem-level check failed at the listed grid indices.
    #[error("precondition violated at grid indices {indices:?}: {reason}")]
    Precondition { indices: Vec<usize>, reason: String },

    /// `E_q(t)` hit a pole `q^n t = 1`.
    #[error("pole of E_q at factor n = {n}")]
    Pole { n: usize },

    /// An internal invariant did not hold.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
