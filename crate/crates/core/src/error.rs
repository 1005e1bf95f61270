use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("unsupported mapping: {0}")]
    UnsupportedMapping(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        SimError::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
