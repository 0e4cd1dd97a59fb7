use thiserror::Error;

/// Errors produced by the bound computations and their supporting kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("eigendecomposition did not converge")]
    NoConvergence,

    #[error("state is singular beyond regularization (min eigenvalue {0:.3e})")]
    SingularState(f64),

    #[error("ill-conditioned eigenproblem (eigenvector condition {0:.3e})")]
    IllConditioned(f64),

    #[error("empty model")]
    EmptyModel,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown zoo model '{0}'")]
    UnknownModel(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("missing capability: {0}")]
    Capability(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("singular information matrix")]
    SingularInformation,

    #[error("solver failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
