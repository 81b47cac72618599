use thiserror::Error;

pub type Result<T> = std::result::Result<T, NvneError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NvneError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |M - M^dag| = {deviation:e} exceeds {tol:e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tol:e}")]
    NotPositive { eigenvalue: f64, tol: f64 },

    #[error("trace {trace:e} is too close to zero")]
    ZeroTrace { trace: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("gradient failure: {0}")]
    GradientFailure(String),

    #[error("signal too weak: |rho[{row},{col}]| = {magnitude:e} at t = {time}")]
    SignalTooWeak {
        row: usize,
        col: usize,
        magnitude: f64,
        time: f64,
    },

    #[error("{param} = {value} is outside the admissible domain: {reason}")]
    OutOfDomain {
        param: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid configuration for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl NvneError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        NvneError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        NvneError::Domain(message.into())
    }

    /// True for errors raised by the numerics rather than by input plumbing.
    pub fn is_numeric(&self) -> bool {
        !matches!(self, NvneError::Config { .. } | NvneError::Io(_))
    }
}

impl From<std::io::Error> for NvneError {
    fn from(e: std::io::Error) -> Self {
        NvneError::Io(e.to_string())
    }
}
