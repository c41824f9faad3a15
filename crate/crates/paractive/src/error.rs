use thiserror::Error;

/// Errors surfaced by dataset loading, learners, samplers and engines.
#[derive(Error, Debug)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("empty task: no examples left after digit filtering")]
    EmptyTask,

    #[error("feature value {0} outside the raw pixel range [0, 255]")]
    PixelRange(f64),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("duplicate support vector (stream index {0})")]
    DuplicateSupportVector(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
