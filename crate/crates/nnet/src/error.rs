use thiserror::Error;

/// Broad failure category, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Training,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("layer {layer} ({kind}): input side {side} is smaller than window {window}")]
    ShapeUnderflow {
        layer: usize,
        kind: &'static str,
        side: usize,
        window: usize,
    },

    #[error("input has {got} features, model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("training failed: {0}")]
    Training(String),

    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },

    #[error("unsupported checkpoint version `{0}`")]
    UnsupportedVersion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::ShapeUnderflow { .. } => ErrorKind::Config,
            Error::ShapeMismatch { .. }
            | Error::Checkpoint { .. }
            | Error::UnsupportedVersion(_) => ErrorKind::Data,
            Error::NonFiniteLoss { .. } | Error::Training(_) => ErrorKind::Training,
            Error::Io(_) => ErrorKind::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
