use thiserror::Error;

/// Failure classes shared by the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// Unreadable or malformed input file.
    #[error("input: {0}")]
    Input(String),
    #[error("config: {0}")]
    Config(String),
    /// Scene mode and requested operation do not fit together.
    #[error("mode: {0}")]
    Mode(String),
    /// Dimensions or counts disagree.
    #[error("shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
