//! Crate-wide error type and exit-code mapping.

use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes of two operands do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A documented precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// NaN/Inf surfaced where a finite value is required.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Bad configuration value or unusable flag combination.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Input data violates the corpus contract.
    #[error("data error: {0}")]
    Data(String),

    /// A stage input produced by an earlier stage does not exist.
    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    /// An artifact exists but carries an unexpected format version or shape.
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 0 ok, 1 usage, 2 I/O, 3 missing
    /// artifact, 4 schema mismatch, 5 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 1,
            Error::Data(_) | Error::Io { .. } => 2,
            Error::MissingArtifact(_) => 3,
            Error::SchemaMismatch(_) => 4,
            Error::Numeric(_) | Error::DimensionMismatch(_) | Error::Precondition(_) => 5,
        }
    }
}
