use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Problem {
        path: PathBuf,
        #[source]
        source: lmcert_core::Error,
    },
    #[error(transparent)]
    Core(#[from] lmcert_core::Error),
}
