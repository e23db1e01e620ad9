use thiserror::Error;

pub type Result<T> = std::result::Result<T, CalibError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("no closed-form pushforward for {0}; use the rank test on empirical output")]
    NoClosedFormPushforward(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("not enough data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("optimizer failed to converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error(
        "proposal budget exhausted after {proposals} proposals with {accepted} acceptances \
         (acceptance rate {rate:.3e})"
    )]
    ProposalsExhausted {
        proposals: u64,
        accepted: usize,
        rate: f64,
    },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: u64,
        #[source]
        source: Box<CalibError>,
    },

    #[error("{failed} of {total} replicates failed, above the tolerated fraction; first: {first}")]
    FailureThreshold {
        failed: usize,
        total: usize,
        first: Box<CalibError>,
    },

    #[error("matrix is numerically singular")]
    SingularMatrix,

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CalibError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CalibError::InvalidParameter(msg.into())
    }

    pub(crate) fn in_replicate(self, replicate: u64) -> Self {
        CalibError::Replicate {
            replicate,
            source: Box::new(self),
        }
    }

    /// True for per-replicate failures a harness may count and skip rather
    /// than abort on.
    pub fn is_recoverable(&self) -> bool {
        matches!(
            self.root(),
            CalibError::NonConvergence { .. } | CalibError::ProposalsExhausted { .. }
        )
    }

    /// Strips any replicate wrapping.
    pub fn root(&self) -> &CalibError {
        match self {
            CalibError::Replicate { source, .. } => source.root(),
            other => other,
        }
    }
}
