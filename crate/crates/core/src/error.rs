use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {constraint}")]
    InvalidParameter {
        field: &'static str,
        constraint: String,
    },

    #[error("length mismatch: expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("symbol {symbol:?} is not in the channel input alphabet")]
    UnknownInput { symbol: String },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("instance too large for exact enumeration: {atoms} atoms (limit {limit})")]
    InstanceTooLarge { atoms: u128, limit: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, constraint: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            constraint: constraint.into(),
        }
    }
}
