use std::io;
use std::path::Path;

use thiserror::Error;

/// Errors produced by the scorewriter library.
///
/// Each variant corresponds to one diagnostic category; the CLI prints the
/// category name as a one-line prefix on failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("score error: {0}")]
    Score(String),

    #[error("identification error: {0}")]
    Identification(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Adapter for `map_err` that names the file in an I/O failure.
    pub fn io_at(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
        move |e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    /// Short category name used in one-line diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Format(_) => "format",
            Error::Argument(_) => "argument",
            Error::Data(_) => "data",
            Error::Numerical(_) => "numerical",
            Error::Layout(_) => "layout",
            Error::Alignment(_) => "alignment",
            Error::Fit(_) => "fit",
            Error::Training(_) => "training",
            Error::Score(_) => "score",
            Error::Identification(_) => "identification",
            Error::Config(_) => "config",
        }
    }
}

impl From<image::ImageError> for Error {
    fn from(err: image::ImageError) -> Self {
        match err {
            image::ImageError::IoError(e) => Error::Io(e),
            other => Error::Format(other.to_string()),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
