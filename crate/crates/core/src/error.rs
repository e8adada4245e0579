use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the numerical routines.
///
/// Validation errors (bad arguments, points off the boundary) are kept
/// apart from numeric failures so that front ends can map them to
/// different exit codes, see [`Error::is_numeric`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("point is not on the boundary (|defining function| = {residual:e})")]
    NotOnBoundary { residual: f64 },

    #[error("point is an interior point of the simplex (sum t^2m = {sum})")]
    InteriorPoint { sum: f64 },

    #[error("degenerate polar chart: 1 - sum over Q of |z_j|^(2m_j) = {denominator:e} <= 0")]
    DegenerateDenominator { denominator: f64 },

    #[error("overflow in {op}: u^m = {exponent:e} exceeds the exponent range")]
    Overflow { op: &'static str, exponent: f64 },

    #[error(
        "precision exhausted in {op}: cancellation of {digits_lost:.1} digits at u^m = {exponent}"
    )]
    PrecisionExhausted {
        op: &'static str,
        exponent: f64,
        digits_lost: f64,
    },

    #[error("{op}: tolerance not met (estimated error {achieved:e}, requested {requested:e})")]
    ToleranceNotMet {
        op: &'static str,
        achieved: f64,
        requested: f64,
    },

    #[error("decay rate must be positive, got {0}")]
    DecayRateNonPositive(f64),

    #[error("{op}: series does not converge within the budget ({detail})")]
    Divergence { op: &'static str, detail: String },

    #[error("{op} requires calibrated settings; run calibrate first")]
    NotCalibrated { op: &'static str },

    #[error("calibration inconsistent: {first} vs {second} (relative difference {rel:e})")]
    CalibrationInconsistent { first: f64, second: f64, rel: f64 },
}

impl Error {
    /// True for failures of the numerics (as opposed to invalid input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Overflow { .. }
                | Error::PrecisionExhausted { .. }
                | Error::ToleranceNotMet { .. }
                | Error::Divergence { .. }
                | Error::CalibrationInconsistent { .. }
        )
    }
}
