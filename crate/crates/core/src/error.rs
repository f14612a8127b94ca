use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes, widths or hyperparameters that cannot work together.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {msg}{}", offset.map(|o| format!(" (at byte offset {o})")).unwrap_or_default())]
    Data { msg: String, offset: Option<u64> },

    /// Broken internal contract (length mismatch, stale cache, ...).
    #[error("internal error: {0}")]
    Internal(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("undefined test: {0}")]
    UndefinedTest(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("report error: {0}")]
    Report(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data {
            msg: msg.into(),
            offset: None,
        }
    }

    pub(crate) fn data_at(msg: impl Into<String>, offset: u64) -> Self {
        Error::Data {
            msg: msg.into(),
            offset: Some(offset),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
