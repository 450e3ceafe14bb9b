use thiserror::Error;

/// Errors raised by targets, denoisers, samplers and analytics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("observation has zero posterior mass under the target")]
    ZeroPosterior,

    #[error("observation lies outside the range of the channel (residual {0:e})")]
    OutsideRange(f64),

    #[error("input is inside the matching window: distance {distance:e} < {window:e}")]
    InsideWindow { distance: f64, window: f64 },

    #[error("negative transition rate {rate:e} at coordinate {coordinate}, t = {t}")]
    NegativeRate { rate: f64, coordinate: usize, t: f64 },

    #[error("chain failed at step {step}: {reason}")]
    ChainFailure { step: usize, reason: String },

    #[error("reverse OU dynamics are undefined at t = 0")]
    ReverseOuAtZero,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
