//! Per-stage run manifests.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::formats::write_json;

pub const SOFTWARE: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed(String),
}

/// Everything needed to rerun a stage. Timings are the only field that
/// differs between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub stage: String,
    pub status: RunStatus,
    pub config: PipelineConfig,
    /// sha256 over the corpus files, in config order.
    pub corpus_sha256: Option<String>,
    pub tokenizer_id: Option<String>,
    pub inputs: BTreeMap<String, usize>,
    pub outputs: BTreeMap<String, usize>,
    pub timings_ms: BTreeMap<String, u64>,
}

impl RunManifest {
    pub fn new(stage: &str, config: &PipelineConfig) -> Self {
        RunManifest {
            software: SOFTWARE.into(),
            stage: stage.into(),
            status: RunStatus::Ok,
            config: config.clone(),
            corpus_sha256: None,
            tokenizer_id: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn path(dir: &Path, stage: &str) -> PathBuf {
        dir.join(format!("{stage}.manifest.json"))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = Self::path(dir, &self.stage);
        write_json(&path, self)?;
        Ok(path)
    }

    /// Runs `f` and records its wall-clock time under `label`.
    pub fn timed<R>(&mut self, label: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.timings_ms.insert(label.into(), start.elapsed().as_millis() as u64);
        out
    }
}

pub fn hash_files(paths: &[impl AsRef<Path>]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        let p = p.as_ref();
        let mut r = BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?);
        io::copy(&mut r, &mut h).with_context(|| format!("hashing {}", p.display()))?;
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        std::fs::write(&a, "ab").unwrap();
        std::fs::write(&b, "c").unwrap();
        assert_eq!(
            hash_files(&[&a, &b]).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
