use alloc::string::String;

/// Errors and termination signals raised by the core library.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value produced by {0}")]
    NumericOverflow(&'static str),
    #[error("unknown benchmark problem `{0}`")]
    NotFound(String),
    /// The costate vanished, so the transversality condition already holds.
    /// Callers treat this as termination rather than failure.
    #[error("costate is zero; the point is stationary")]
    Converged,
    /// The Hessian annihilates the chosen CLF subgradient, so the
    /// maximum-principle objective is identically zero over the control set.
    #[error("degenerate drive: Hessian times CLF subgradient is zero")]
    DegenerateDrive,
    #[error("control metric is not symmetric positive definite")]
    NonSpdMetric,
    #[error("Hessian is singular")]
    SingularMetric,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
