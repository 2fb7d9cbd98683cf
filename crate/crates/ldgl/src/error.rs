use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("layer planes cannot be aligned to the vertical grid: {0}")]
    LayerAlignment(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("resolution guard violated: {0}")]
    Resolution(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("argument outside the function domain: {0}")]
    Argument(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("non-finite energy at iteration {iter}")]
    NonFinite { iter: usize },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}
