use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("time grid mismatch")]
    GridMismatch,
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("majorant diverges: rho*t = {0} >= 1")]
    RegularityExceeded(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no candidate on the ladder bounds the coefficients")]
    NoMajorantCandidate,
    #[error("time {s} is past the final time {s_bar}")]
    PastFinalTime { s: f64, s_bar: f64 },
    #[error("symbol is not elliptic at the origin")]
    NotElliptic,
    #[error("eigen-solver failure: {0}")]
    EigenFailure(String),
    #[error("eigenvalue continuation lost the branch at {0:?}")]
    BranchLost(Vec<f64>),
    #[error("condition (i) violated: |P0 dA P0| = {0:e}")]
    ConditionIViolated(f64),
    #[error("mu matrix is ambiguous for pair ({0}, {1})")]
    AmbiguousMu(usize, usize),
    #[error("sample point outside the convergence ball: |x| = {norm} >= {radius}")]
    OutsideConvergence { norm: f64, radius: f64 },
    #[error("ODE step rejected at s = {s}: local error {err:e}")]
    StepRejected { s: f64, err: f64 },
    #[error("iterate left the ball: |||u||| = {0}")]
    NormEscape(f64),
    #[error("contraction constant K = {k} is not below {limit}")]
    KTooLarge { k: f64, limit: f64 },
    #[error("Picard iteration did not converge in {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("delta = {delta} is outside (0, {ceiling})")]
    IndexOutOfRange { delta: f64, ceiling: f64 },
    #[error("model error: {0}")]
    Model(String),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotElliptic
            | Error::ConditionIViolated(_)
            | Error::AmbiguousMu(..)
            | Error::BranchLost(_) => 2,
            Error::KTooLarge { .. } | Error::NormEscape(_) => 3,
            Error::NoConvergence { .. } => 4,
            Error::IndexOutOfRange { .. } | Error::Model(_) | Error::InvalidArgument(_) => 5,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
