//! JSON result records written by every command.

use std::fs;
use std::path::Path;
use std::process::Command;

use blowfly_core::criteria::ComparisonRow;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{CliError, Result};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema_version: u64,
    pub command: String,
    pub seed: u64,
    /// Every option after defaults were applied.
    pub config: Value,
    pub git_describe: Option<String>,
    pub runtime_seconds: f64,
    pub result: Value,
    /// Rows this run contributes to a model comparison table.
    #[serde(default)]
    pub comparison: Vec<ComparisonRow>,
}

pub fn git_describe() -> Option<String> {
    let out = Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()?;
    if !out.status.success() {
        return None;
    }
    let s = String::from_utf8(out.stdout).ok()?.trim().to_string();
    (!s.is_empty()).then_some(s)
}

pub fn write_result(path: &Path, record: &ResultFile) -> Result<()> {
    let text = serde_json::to_string_pretty(record).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a result file, rejecting other schema versions.
pub fn read_result(path: &Path) -> Result<ResultFile> {
    if !path.is_file() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let found = value.get("schema_version").and_then(Value::as_u64).unwrap_or(0);
    if found != SCHEMA_VERSION {
        return Err(CliError::SchemaMismatch {
            path: path.to_path_buf(),
            found,
            expected: SCHEMA_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Load a JSON parameter file into `T`.
pub fn read_params<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.is_file() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}
