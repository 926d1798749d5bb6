use thiserror::Error;

/// Library-wide error type. Every guard in the crate produces one of these;
/// nothing is ever silently truncated.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A requested bound exceeds the configured enumeration ceiling.
    #[error("bound {bound} exceeds enumeration ceiling {ceiling}")]
    CeilingExceeded { bound: u64, ceiling: u64 },

    /// An internal enumeration grew past a hard resource cap.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
}
