use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{origin}: joint labels [{}] do not match the body model [{}]", found.join(","), expected.join(","))]
    SchemaMismatch {
        origin: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] homolact_core::error::Error),
    #[error("optimizer did not converge for: {}", .0.join(", "))]
    NotConverged(Vec<String>),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(origin: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            origin: origin.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code of the failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::SchemaMismatch { .. } | Self::Config { .. } => 3,
            Self::Validation(_) | Self::Core(_) => 4,
            Self::NotConverged(_) => 5,
            Self::Io { .. } => 6,
        }
    }
}
