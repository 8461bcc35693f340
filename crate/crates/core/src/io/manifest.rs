//! Output directory with a checksummed manifest, written last.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one CLI run. No wall-clock fields, so replays of the same
/// config are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub subcommand: String,
    pub config: RunConfig,
    pub files: Vec<FileEntry>,
    pub verdicts: BTreeMap<String, bool>,
    pub passed: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Single writer for a run's artifacts.
pub struct OutputDir {
    root: PathBuf,
    files: BTreeMap<String, FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to `rel` (a `/`-separated relative path).
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.insert(
            rel.to_string(),
            FileEntry {
                path: rel.to_string(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        self.write(rel, text.as_bytes())
    }

    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Writes the manifest listing every artifact and consumes the writer.
    pub fn finish(
        self,
        subcommand: &str,
        config: &RunConfig,
        verdicts: BTreeMap<String, bool>,
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            config: config.clone(),
            files: self.files.into_values().collect(),
            passed: verdicts.values().all(|&v| v),
            verdicts,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.root.join(MANIFEST_FILE), text)?;
        Ok(manifest)
    }
}
