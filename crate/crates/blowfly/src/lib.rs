//! File formats, result records and the command-line front end for
//! [`blowfly_core`].

pub mod cli;
pub mod io;
pub mod results;

use std::path::PathBuf;

pub use blowfly_core as core;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Core {
        path: PathBuf,
        source: blowfly_core::Error,
    },
    #[error(transparent)]
    Model(#[from] blowfly_core::Error),
    #[error("{path}: schema version {found}, expected {expected}")]
    SchemaMismatch { path: PathBuf, found: u64, expected: u64 },
    #[error("{0}")]
    Config(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
