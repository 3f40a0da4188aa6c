use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written next to every output set.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the config file bytes followed by the effective overrides.
    pub config_digest: String,
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: u64,
    pub overrides: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub notes: Vec<String>,
}

pub fn digest(config_bytes: &[u8], overrides: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(config_bytes);
    h.update(b"\n");
    h.update(overrides.to_string().as_bytes());
    hex::encode(h.finalize())
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, config_bytes: &[u8], seed: Option<u64>, overrides: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            config_digest: digest(config_bytes, &overrides),
            config_path: config_path.map(Path::to_path_buf),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            overrides,
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::failure(format!("manifest: {e}")))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
