use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid under-resolved: spacing {spacing} exceeds limit {limit} ({what})")]
    UnderResolved {
        spacing: f64,
        limit: f64,
        what: &'static str,
    },

    #[error("wave speed not real: 1 + 4πη reaches {min_value} (violation {violation})")]
    PositivityViolated { min_value: f64, violation: f64 },

    #[error("scatterer {index} does not cover any grid node")]
    ScattererOffGrid { index: usize },

    #[error("points coincide: {0}")]
    CoincidentPoints(String),

    #[error("point {0} lies outside the supported region")]
    OutsideSupport(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite coefficient in discrete operator at row {row}")]
    NonFinite { row: usize },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("linear solve residual {residual:e} exceeds {tolerance:e}")]
    InaccurateSolve { residual: f64, tolerance: f64 },

    #[error(
        "fixed-point iteration did not converge after {iterations} iterations \
         (last relative change {last_change:e}{})",
        if *.diverging { ", diverging" } else { "" }
    )]
    NonConvergence {
        iterations: usize,
        last_change: f64,
        diverging: bool,
    },

    #[error("incident angle {index} ({angle} rad): {source}")]
    Angle {
        index: usize,
        angle: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("realization with seed {seed} failed: {source}")]
    Realization {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True if the root cause is a non-converging fixed-point iteration.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. } => true,
            Error::Angle { source, .. } | Error::Realization { source, .. } => {
                source.is_non_convergence()
            }
            _ => false,
        }
    }
}
