//! Content manifest of a scenario's output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    /// Hashes `files` (relative to `dir`), sorted by path.
    pub fn build(dir: &Path, kind: &str, seed: u64, files: &[PathBuf]) -> Result<Self, CliError> {
        let mut entries = files
            .iter()
            .map(|rel| {
                let bytes = fs::read(dir.join(rel)).map_err(|e| CliError::io(format!("reading {}", rel.display()), e))?;
                let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                Ok(ManifestEntry { path, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Manifest { schema_version: MANIFEST_SCHEMA_VERSION, kind: kind.to_string(), seed, files: entries })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let s = fs::read_to_string(&path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Ok(serde_json::from_str(&s)?)
    }

    /// Paths whose current contents no longer match their recorded hash.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|e| fs::read(dir.join(&e.path)).map(|b| sha256_hex(&b) != e.sha256).unwrap_or(true))
            .map(|e| e.path.clone())
            .collect()
    }
}
