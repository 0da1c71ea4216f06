use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape/layout disagreement between tensors, layers or payloads.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value escaped the finite range (NaN/Inf) where it must not.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Caller-supplied value outside its documented domain.
    #[error("invalid input: {0}")]
    Input(String),

    /// Configuration failed validation; the message names the offending key.
    #[error("config error: {0}")]
    Config(String),

    /// A received byte payload does not decode to a valid update.
    #[error("corrupt payload at byte {offset}: {reason}")]
    CorruptPayload { offset: usize, reason: String },

    /// Training produced a non-finite aggregated model.
    #[error("numeric abort at round {round}: {reason}")]
    NumericAbort { round: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
