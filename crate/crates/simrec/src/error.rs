use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] simrec_core::Error),
    #[error("{path}: line {line}: {detail}")]
    MalformedRecord { path: PathBuf, line: usize, detail: String },
    #[error("unknown journal {0}")]
    UnknownJournal(String),
    #[error("split file names unknown paper {0}")]
    UnknownPaper(String),
    #[error("artifact manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {detail}")]
    Config { path: PathBuf, detail: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Stable variant name for diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Core(simrec_core::Error::UnknownJournal(_)) | Error::UnknownJournal(_) => "UnknownJournal",
            Error::Core(e) => e.name(),
            Error::MalformedRecord { .. } => "MalformedRecord",
            Error::UnknownPaper(_) => "UnknownPaper",
            Error::ManifestMismatch(_) => "ManifestMismatch",
            Error::Io { .. } => "IoError",
            Error::Config { .. } => "ConfigError",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
