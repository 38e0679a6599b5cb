//! Run manifests: what was run, with which inputs, producing which files.

use crate::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub code_version: String,
    /// Input path → SHA-256.
    pub input_digests: BTreeMap<String, String>,
    /// Digest of everything above; output files carry it in their header.
    pub run_id: String,
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<String> {
    Ok(digest_bytes(&std::fs::read(path)?))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    /// Timestamps are left out of the run id so identical runs share it.
    pub fn new(
        command: &str,
        parameters: serde_json::Value,
        seed: Option<u64>,
        input_digests: BTreeMap<String, String>,
    ) -> Self {
        let identity = serde_json::json!({
            "command": command,
            "parameters": parameters,
            "seed": seed,
            "code_version": CODE_VERSION,
            "input_digests": input_digests,
        });
        let run_id = digest_bytes(identity.to_string().as_bytes())[..16].to_string();
        Self {
            command: command.into(),
            parameters,
            seed,
            code_version: CODE_VERSION.into(),
            input_digests,
            run_id,
            outputs: Vec::new(),
            started_unix: now(),
            finished_unix: None,
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Stamps the finish time and writes `manifest-<run_id>.json` into `dir`.
    pub fn finish(&mut self, dir: &Path) -> Result<std::path::PathBuf> {
        self.finished_unix = Some(now());
        let path = dir.join(format!("manifest-{}.json", self.run_id));
        let json = serde_json::to_string_pretty(self).map_err(|e| crate::Error::Config(e.to_string()))?;
        std::fs::write(&path, json)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| crate::Error::Parse { path: path.display().to_string(), message: e.to_string() })
    }
}
