use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("traces have unequal lengths: expected {expected} steps, found {found}")]
    Ragged { expected: usize, found: usize },
    #[error("every seed failed; first failure: {0}")]
    AllSeedsFailed(String),
    #[error(transparent)]
    Core(#[from] libo_core::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
