use thiserror::Error;

/// Errors raised by the streaming control library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes that do not line up (vector dimensions, group sizes).
    #[error("structural error: {0}")]
    Structural(String),
    /// A configuration value outside its admissible range.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },
    /// Frames pushed out of order.
    #[error("sequencing error: expected frame {expected}, got {got}")]
    Sequencing { expected: usize, got: usize },
    /// Malformed or out-of-range input data.
    #[error("data error: {0}")]
    Data(String),
    /// Non-finite intermediate values.
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
