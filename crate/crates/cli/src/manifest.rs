use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;

/// Top-level key that marks a document as a run manifest.
pub const MANIFEST_KEY: &str = "qtraj_manifest";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

impl ArtifactEntry {
    pub fn of(file: &str, bytes: &[u8]) -> Self {
        Self { file: file.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) }
    }
}

/// Everything needed to reproduce and check a run. Only `wall_time_seconds`
/// and `threads` may differ between two runs of the same config.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a> {
    pub qtraj_manifest: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a ScenarioConfig,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<ArtifactEntry>,
}

/// The part of a manifest read back by `verify`.
#[derive(Debug, Deserialize)]
pub struct ManifestArtifacts {
    pub artifacts: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
