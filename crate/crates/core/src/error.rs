use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("signal of {len} samples is shorter than one frame ({needed} samples)")]
    TooShort { len: usize, needed: usize },
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("invalid state: {0}")]
    State(String),
    #[error("format error in {path:?}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("checkpoint config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("training diverged at step {step}: {msg}")]
    Diverged { step: u64, msg: String },
    #[error("wav error in {path:?}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("io error on {path:?}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn shape(expected: impl std::fmt::Display, found: impl std::fmt::Display) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
