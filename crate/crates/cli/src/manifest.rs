use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use wavefm::hash::{sha256_hex, tree_digest};
use wavefm::{Error, Result};

pub const MANIFEST_FILE: &str = "run.json";

#[derive(Debug, Serialize)]
pub struct Input {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one artifact-producing command, written beside its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<Input>,
    pub outputs: Vec<PathBuf>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub timing: serde_json::Value,
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Content hash of a file or directory tree.
pub fn input(path: &Path) -> Result<Input> {
    let sha256 = if path.is_dir() {
        tree_digest(path)?
    } else {
        sha256_hex(&std::fs::read(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?)
    };
    Ok(Input {
        path: path.into(),
        sha256,
    })
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .map_err(|e| Error::Io { path, source: e })
    }
}
