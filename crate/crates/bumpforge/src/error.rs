use thiserror::Error;

/// Unified error type for solver, quadrature, and I/O failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("not a regular bump: {0}")]
    NotRegular(String),

    #[error("singular crossing Jacobian: {0}")]
    SingularJacobian(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("no convergence after {iters} iterations (last error {last:.3e})")]
    NoConvergence { iters: usize, last: f64 },

    #[error("divergence detected at iteration {iter} (error {error:.3e})")]
    DivergenceDetected { iter: usize, error: f64 },

    #[error("quadrature refinement changed the result by {defect:.3e} (allowed {allowed:.3e})")]
    QuadratureFailure { defect: f64, allowed: f64 },

    #[error("solution is not a bump: {0}")]
    NotABump(String),

    #[error("operation not applicable: {0}")]
    NotApplicable(String),

    #[error("threshold crossing count {0} is odd; superthreshold set is not a union of intervals")]
    OddCrossings(usize),

    #[error("malformed data: {0}")]
    Data(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code contract: 0 success, 1 numeric failure, 2 assumption
    /// failure, 3 non-convergence, 64 config error, 65 data error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 64,
            Error::Data(_) | Error::Io(_) => 65,
            Error::NotRegular(_)
            | Error::SingularJacobian(_)
            | Error::NotABump(_)
            | Error::NotApplicable(_) => 2,
            Error::NoConvergence { .. } | Error::DivergenceDetected { .. } => 3,
            Error::InvalidParameter(_)
            | Error::SingularMatrix(_)
            | Error::QuadratureFailure { .. }
            | Error::OddCrossings(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
