//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulation, optimization, and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix or operator dimension is unusable (e.g. below 2).
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    /// Two objects that must agree in shape do not.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// An input value is NaN or infinite where a finite number is required.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// A scalar argument lies outside its allowed domain.
    #[error("{context}: value {value} outside [{min}, {max}]")]
    OutOfDomain {
        context: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// A matrix expected to be Hermitian is not, within tolerance.
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    /// Catch-all for invalid inputs with a free-form description.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Configuration file or flag validation failure.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
