use thiserror::Error;

/// Error type shared by all operators in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("kernel constant calibration failed: residual {residual:.3e} exceeds {limit:.3e}")]
    CalibrationFailure { residual: f64, limit: f64 },

    #[error("target distance {target:.3e} unattainable at this resolution; achieved {achieved:.3e}")]
    ResolutionFailure { target: f64, achieved: f64 },

    #[error(
        "truncation tail {tail:.6e} exceeds bound {bound:.6e} (truncated value {value:.6e})"
    )]
    TruncationExceeded { value: f64, tail: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
