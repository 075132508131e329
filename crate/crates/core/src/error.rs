use thiserror::Error;

/// Errors raised by the library. Numerical violations found by sweeps are data,
/// not errors; see [`crate::bounds::BoundReport`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown target `{0}`")]
    UnknownTarget(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("time {t} outside {range}")]
    TimeOutOfRange { t: f64, range: &'static str },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite quadrature: {0}")]
    NonFinite(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("t = {t} is beyond the blow-up horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },

    #[error("theorem `{theorem}` does not apply to {target}")]
    Inapplicable { theorem: String, target: String },

    #[error("empty effective support: {0}")]
    EmptySupport(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
}

pub(crate) fn check_t_bar(t_bar: f64) -> Result<()> {
    if t_bar > 0.0 && t_bar <= 1.0 {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange { t: t_bar, range: "(0, 1]" })
    }
}

pub(crate) fn check_finite_point(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("point {x:?} is not finite")))
    }
}
