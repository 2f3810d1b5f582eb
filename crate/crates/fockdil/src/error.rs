use thiserror::Error;

pub type Result<T> = std::result::Result<T, FockError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("svd did not converge for a {rows}x{cols} matrix")]
    SvdFailure { rows: usize, cols: usize },
    #[error("matrix is not positive semidefinite: minimum eigenvalue {min_eig:e}")]
    NotPsd { min_eig: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("not a row contraction: norm of sum T_i T_i^* is {norm}")]
    NotContraction { norm: f64 },
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },
    #[error("no common unit eigenvector of the adjoints was found")]
    NoInvariantVectorState,
    #[error("tuple is not ergodic")]
    NotErgodic,
    #[error("frame is not valid for this tuple (residual {residual:e})")]
    InvalidFrame { residual: f64 },
    #[error("subspace is not invariant (worst residual {residual:e})")]
    NotInvariant { residual: f64 },
    #[error("lifting is not reduced")]
    NotReduced,
    #[error("blocks are not consistent with a contractive lifting (residual {residual:e})")]
    InconsistentLifting { residual: f64 },
    #[error("tuple violates the constraints (worst polynomial residual {residual:e})")]
    NotConstrained { residual: f64 },
    #[error("tuple is not commuting (residual {residual:e})")]
    NotCommuting { residual: f64 },
    #[error("truncation buffer too small: need {needed}, got {got}")]
    BufferTooSmall { needed: usize, got: usize },
    #[error("unsupported structure: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
}
