//! Run manifest: the effective configuration, input hashes and, per stage,
//! a fingerprint, timestamps and the sha256 of every artifact written.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats::{read_json, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "searchrec/manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output root, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// Hash of the stage's configuration and upstream artifacts.
    pub fingerprint: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    /// Set when a later run found this stage up to date and kept it.
    pub skipped: bool,
    pub artifacts: Vec<Artifact>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    pub cause: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<Artifact>,
    pub stages: Vec<StageRecord>,
    pub failure: Option<Failure>,
}

impl Manifest {
    pub fn new(config: RunConfig, seed: u64) -> Self {
        Manifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            seed,
            config,
            inputs: Vec::new(),
            stages: Vec::new(),
            failure: None,
        }
    }

    pub fn path(root: &Path) -> PathBuf {
        root.join(MANIFEST_FILE)
    }

    pub fn load(root: &Path) -> Result<Self> {
        let path = Self::path(root);
        let m: Manifest = read_json(&path)?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(Error::input(&path, format!("unsupported manifest {} v{}", m.format, m.version)));
        }
        Ok(m)
    }

    pub fn load_if_present(root: &Path) -> Result<Option<Self>> {
        if Self::path(root).exists() {
            Self::load(root).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        write_json(&Self::path(root), self)
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Inserts or replaces the record, keeping the canonical stage order.
    pub fn put_stage(&mut self, record: StageRecord, order: &[&str]) {
        self.stages.retain(|s| s.name != record.name);
        self.stages.push(record);
        let pos = |n: &str| order.iter().position(|o| *o == n).unwrap_or(usize::MAX);
        self.stages.sort_by_key(|s| pos(&s.name));
    }

    /// Drops every record at or after `name` in `order`.
    pub fn truncate_from(&mut self, name: &str, order: &[&str]) {
        if let Some(i) = order.iter().position(|o| *o == name) {
            let later = &order[i..];
            self.stages.retain(|s| !later.contains(&s.name.as_str()));
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn hash_file(root: &Path, rel: &str) -> Result<Artifact> {
    let path = root.join(rel);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(Artifact { path: rel.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
}

/// `true` when every artifact still exists with the recorded hash.
pub fn verify(root: &Path, artifacts: &[Artifact]) -> bool {
    artifacts.iter().all(|a| match std::fs::read(root.join(&a.path)) {
        Ok(b) => sha256_hex(&b) == a.sha256,
        Err(_) => false,
    })
}

pub fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}
