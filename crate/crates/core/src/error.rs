use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("mode mismatch: expected {expected}, found {found}")]
    ModeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("unsupported forest format version {0}")]
    Version(u32),
    #[error("corrupt forest document: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
