use thiserror::Error;

/// Errors raised by the Koopman approximation library.
#[derive(Debug, Error)]
pub enum KoopmanError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state {state:?} left the domain {context}")]
    DomainEscape { state: Vec<f64>, context: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A Gram or data matrix is numerically singular. `condition` is the
    /// ratio of extreme singular values (infinite when exactly singular).
    #[error("rank-deficient matrix (condition estimate {condition:.3e}, rank {rank} of {size})")]
    RankDeficient {
        condition: f64,
        rank: usize,
        size: usize,
    },

    #[error("eigensolver did not converge (condition estimate {condition:.3e})")]
    EigenFailure { condition: f64 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl KoopmanError {
    /// True for failures that come from the numerics rather than from the
    /// caller's configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            KoopmanError::RankDeficient { .. }
                | KoopmanError::EigenFailure { .. }
                | KoopmanError::DomainEscape { .. }
        )
    }
}

pub type Result<T, E = KoopmanError> = std::result::Result<T, E>;
