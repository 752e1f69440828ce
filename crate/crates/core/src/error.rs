use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate spectrum: E_max == E_min ({0})")]
    DegenerateSpectrum(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("superoperator dimension cap exceeded: dim {dim} > {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("numerical corruption: {0}")]
    NumericalCorruption(String),

    #[error("integration failure at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("run failed ({context}): {source}")]
    Run {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True if this error (or the one it wraps) came from the integrator.
    pub fn is_integration_failure(&self) -> bool {
        match self {
            Error::Integration { .. } => true,
            Error::Run { source, .. } => source.is_integration_failure(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
