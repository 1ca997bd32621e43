use thiserror::Error;

/// Errors raised by the Gaussian-state and channel machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mode index {index} out of range for {modes} mode(s)")]
    ModeIndex { index: usize, modes: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error(
        "covariance matrix violates the uncertainty principle (min symplectic eigenvalue {0})"
    )]
    Unphysical(f64),

    #[error("channel is not completely positive")]
    NotCompletelyPositive,

    #[error("unsupported channel: {0}")]
    UnsupportedChannel(String),

    #[error("complete loss has no finite dual amplification")]
    NoFiniteDual,

    #[error("covariance matrix is not in two-mode standard form")]
    NotStandardForm,

    #[error("degenerate marginal: n_A = {n_a}, n_B = {n_b} (need both > 1/2)")]
    DegenerateMarginal { n_a: f64, n_b: f64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("spec parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
