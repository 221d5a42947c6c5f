use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("not a density operator: {0}")]
    InvalidState(String),

    #[error("invalid tensor structure: {0}")]
    InvalidStructure(String),

    #[error("unknown party label `{0}`")]
    UnknownParty(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("free-state set has no {0}")]
    CapabilityMissing(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
