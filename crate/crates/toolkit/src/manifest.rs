//! Run manifests: what was run, on which inputs, producing which files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Inputs carry an absolute path; artifacts are relative to the
    /// manifest's directory.
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of_bytes(path: PathBuf, bytes: &[u8]) -> Self {
        FileDigest { path, sha256: sha256_hex(bytes), bytes: bytes.len() as u64 }
    }

    pub fn of_file(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::of_bytes(path.to_path_buf(), &bytes))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSection {
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub command: String,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_hash: String,
    pub config: Value,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
    pub wall_time_s: f64,
    pub diagnostics: BTreeMap<String, Value>,
    pub error: Option<ErrorSection>,
}

impl RunManifest {
    pub fn new(command: &str, config: Value, seed: u64, threads: usize) -> Self {
        let config_hash = sha256_hex(config.to_string().as_bytes());
        RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash,
            config,
            seed,
            threads,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            wall_time_s: 0.0,
            diagnostics: BTreeMap::new(),
            error: None,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Recomputes every digest in the manifest at `path` and returns one line
/// per mismatch, including a stale config hash.
pub fn verify(path: &Path) -> Result<Vec<String>> {
    let m = RunManifest::read(path)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut problems = Vec::new();
    if sha256_hex(m.config.to_string().as_bytes()) != m.config_hash {
        problems.push("config hash does not match the recorded config".to_string());
    }
    let entries = m.inputs.iter().map(|d| (d.path.clone(), d)).chain(m.artifacts.iter().map(|d| (dir.join(&d.path), d)));
    for (file, d) in entries {
        match fs::read(&file) {
            Ok(bytes) => {
                if bytes.len() as u64 != d.bytes || sha256_hex(&bytes) != d.sha256 {
                    problems.push(format!("{}: digest mismatch", file.display()));
                }
            }
            Err(e) => problems.push(format!("{}: {e}", file.display())),
        }
    }
    Ok(problems)
}
