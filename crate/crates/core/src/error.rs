use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("trace {0} differs from 1")]
    Trace(f64),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("eigendecomposition did not converge")]
    EigenFailure,
    #[error("outcome sum exceeds the identity (max eigenvalue {0})")]
    PomExceedsIdentity(f64),
    #[error("invalid POM: {0}")]
    InvalidPom(&'static str),
    #[error("invalid data: {0}")]
    InvalidData(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("likelihood is zero at the starting point")]
    ZeroLikelihood,
    #[error("POM is imperfect; use the extended estimator")]
    ImperfectPom,
}

pub type Result<T> = core::result::Result<T, Error>;
