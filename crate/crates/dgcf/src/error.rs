use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("checkpoint integrity: {0}")]
    Integrity(String),
    #[error("{0}")]
    Lookup(String),
    #[error(transparent)]
    Model(#[from] dgcf_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    /// 1: configuration, integrity or lookup; 2: data; 3: numerical abort.
    pub fn exit_code(&self) -> u8 {
        use dgcf_core::Error as Core;
        match self {
            Error::Io { .. } | Error::Parse { .. } => 2,
            Error::Config { .. } | Error::Integrity(_) | Error::Lookup(_) => 1,
            Error::Model(Core::NonFinite { .. } | Core::NonFiniteLoss { .. }) => 3,
            Error::Model(Core::Unsorted { .. } | Core::TimeRegression { .. }) => 2,
            Error::Model(_) => 1,
        }
    }
}
