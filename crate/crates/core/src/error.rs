use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("decoded {component} is not finite")]
    NonFinite { component: &'static str },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("tensor format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short code used by the command-line error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidBox(_) => "invalid-box",
            Error::InvalidPolygon(_) => "invalid-polygon",
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::NonFinite { .. } => "non-finite",
            Error::InvalidInput(_) => "invalid-input",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
