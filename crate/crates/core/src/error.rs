use alloc::string::String;

use crate::expr::ParseError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("math domain error: {0}")]
    Domain(String),
    #[error("jet order {requested} out of range [0, {max}]")]
    OrderOutOfRange { requested: u8, max: u8 },
    #[error("jet order exhausted: need order {needed}, source provides {available}")]
    OrderExhausted { needed: u8, available: u8 },
    #[error("metric not positive definite: leading minor {minor} = {value:e}")]
    NotPositiveDefinite { minor: usize, value: f64 },
    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: [f64; 4] },
    #[error("top eigenvalue not simple: {detail} (relative gap {gap:e}, tolerance {tolerance:e})")]
    SpectralGap {
        gap: f64,
        tolerance: f64,
        detail: String,
    },
    #[error("{what} must be positive, found {value:e}")]
    NonPositive { what: String, value: f64 },
    #[error("curvature symmetry violated: residual {residual:e}")]
    Symmetry { residual: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown catalog metric `{0}`")]
    UnknownMetric(String),
}

impl Error {
    /// `true` for errors caused by the geometry of the input (degenerate
    /// spectra, non-positive factors, exhausted derivative budgets) rather than
    /// by malformed input.
    pub fn is_math_domain(&self) -> bool {
        !matches!(
            self,
            Error::Parse(_)
                | Error::InvalidInput(_)
                | Error::UnknownMetric(_)
                | Error::OrderOutOfRange { .. }
        )
    }
}
