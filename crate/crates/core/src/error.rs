use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Every particle assigned zero probability to the observed datum.
    #[error("degenerate update: every particle gives the datum zero probability")]
    Degenerate,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step {step} out of range for trace of length {len}")]
    OutOfRange { step: usize, len: usize },

    #[error("malformed trace at line {line}: {reason}")]
    MalformedTrace { line: usize, reason: String },

    #[error("trace does not match the protocol: {0}")]
    TraceMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
