//! Run manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use sieveboot::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub sieveboot: &'static str,
    pub cli: &'static str,
}

impl Default for Versions {
    fn default() -> Self {
        Self { sieveboot: sieveboot::VERSION, cli: env!("CARGO_PKG_VERSION") }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    /// SHA-256 of the compact JSON of `config`, keys sorted.
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub config: Value,
    /// Outputs relative to the manifest's directory.
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: Value, seed: u64) -> Self {
        Self {
            command: command.into(),
            config_hash: config_hash(&config),
            seed,
            versions: Versions::default(),
            config,
            files: Vec::new(),
        }
    }

    pub fn with_files(mut self, dir: &Path, files: &[PathBuf]) -> Self {
        let mut names: Vec<String> = files
            .iter()
            .map(|p| p.strip_prefix(dir).unwrap_or(p).to_string_lossy().replace('\\', "/"))
            .collect();
        names.sort();
        names.dedup();
        self.files = names;
        self
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

/// `serde_json::Value` keeps object keys sorted, so equal configs hash equally
/// whatever order their fields were written in.
pub fn config_hash(config: &Value) -> String {
    let bytes = serde_json::to_vec(config).expect("JSON value serializes");
    let digest = Sha256::digest(&bytes);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}
