//! Per-stage manifests with SHA-256 hashes of inputs and outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::PipelineError;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub artifact_version: u32,
    pub tool_version: String,
    pub rules_version: String,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a file, or of every file below a directory (sorted by relative path).
pub fn sha256_path(path: &Path) -> Result<String, PipelineError> {
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        let mut h = Sha256::new();
        for f in files {
            let rel = f.strip_prefix(path).unwrap_or(&f).to_string_lossy().replace('\\', "/");
            h.update(rel.as_bytes());
            h.update([0]);
            h.update(std::fs::read(&f).map_err(|e| PipelineError::io(&f, e))?);
        }
        Ok(hex::encode(h.finalize()))
    } else {
        Ok(sha256_bytes(&std::fs::read(path).map_err(|e| PipelineError::io(path, e))?))
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
    for entry in std::fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))? {
        let p = entry.map_err(|e| PipelineError::io(dir, e))?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

pub fn hash_all(paths: &[PathBuf]) -> Result<BTreeMap<String, String>, PipelineError> {
    paths.iter().map(|p| Ok((p.display().to_string(), sha256_path(p)?))).collect()
}

impl Manifest {
    pub fn path(out_dir: &Path, stage: &str) -> PathBuf {
        out_dir.join("manifests").join(format!("{stage}.json"))
    }

    pub fn read(out_dir: &Path, stage: &str) -> Option<Self> {
        let text = std::fs::read_to_string(Self::path(out_dir, stage)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), PipelineError> {
        let path = Self::path(out_dir, &self.stage);
        std::fs::create_dir_all(path.parent().expect("manifest path has a parent")).map_err(|e| PipelineError::io(&path, e))?;
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))
    }

    /// True when a previous run recorded the same inputs and config and
    /// its outputs are still intact.
    pub fn is_current(&self, out_dir: &Path) -> bool {
        let Some(old) = Self::read(out_dir, &self.stage) else { return false };
        old.artifact_version == self.artifact_version
            && old.tool_version == self.tool_version
            && old.rules_version == self.rules_version
            && old.config_sha256 == self.config_sha256
            && old.inputs == self.inputs
            && old.outputs.iter().all(|(p, h)| sha256_path(Path::new(p)).is_ok_and(|now| &now == h))
    }
}
