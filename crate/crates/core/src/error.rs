use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid usage: {0}")]
    InvalidUsage(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("numerical breakdown at iteration {iteration}: {reason}")]
    NumericalBreakdown { iteration: usize, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("signal too short: {0}")]
    TooShort(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("missing RIR for slot (k={k}, l={l}): {path}")]
    MissingRir { k: usize, l: usize, path: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn dim(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
