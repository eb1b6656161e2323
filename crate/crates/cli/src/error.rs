use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rotbox::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    File { path: String, source: io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Csv(e) if e.is_io_error() => "io",
            CliError::Json(e) if e.is_io() => "io",
            CliError::Json(_) | CliError::Csv(_) | CliError::Line { .. } => "malformed-input",
            CliError::File { .. } => "io",
            CliError::Usage(_) => "usage",
        }
    }

    /// The reader of our output went away, as with `| head`.
    pub fn is_broken_pipe(&self) -> bool {
        let kind = match self {
            CliError::File { source, .. } => Some(source.kind()),
            CliError::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(io) => Some(io.kind()),
                _ => None,
            },
            CliError::Json(e) => e.io_error_kind(),
            _ => None,
        };
        kind == Some(io::ErrorKind::BrokenPipe)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
