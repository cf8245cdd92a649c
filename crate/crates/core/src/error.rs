use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid driver specification: {0}")]
    InvalidDriver(String),

    #[error("time {t} outside realized window [{t_min}, {t_max}]")]
    OutsideWindow { t: f64, t_min: f64, t_max: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("vector is (numerically) zero")]
    ZeroVector,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        arg,
        reason: reason.into(),
    }
}
