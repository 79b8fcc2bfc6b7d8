//! Run manifests: the resolved configuration, derived scalars, and a hash of
//! every emitted data file. Re-running the configuration embedded in a
//! manifest reproduces the data files byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentTag};
use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA: &str = "msoc-manifest-v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub crate_version: String,
    pub experiment: ExperimentTag,
    pub config: ExperimentConfig,
    pub scalars: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub outputs: Vec<OutputRecord>,
    pub wall_clock_seconds: f64,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("manifest parse failed: {e}")))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported manifest schema `{}`",
                m.schema
            )));
        }
        Ok(m)
    }
}

/// Collects data files, scalars and notes during a run and emits the
/// manifest last, so partial results survive failures.
pub struct RunContext {
    dir: PathBuf,
    started: Instant,
    outputs: Vec<OutputRecord>,
    pub scalars: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl RunContext {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(RunContext {
            dir,
            started: Instant::now(),
            outputs: Vec::new(),
            scalars: BTreeMap::new(),
            notes: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write (and hash) one output file; flushed immediately.
    pub fn write_file(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, content)?;
        self.outputs.push(OutputRecord {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(content.as_bytes())),
        });
        Ok(())
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Emit `manifest.json` and return the manifest.
    pub fn finish(self, cfg: &ExperimentConfig) -> Result<Manifest> {
        let manifest = Manifest {
            schema: MANIFEST_SCHEMA.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: cfg.experiment,
            config: cfg.clone(),
            scalars: self.scalars,
            notes: self.notes,
            outputs: self.outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Config(format!("manifest emit failed: {e}")))?;
        std::fs::write(self.dir.join(MANIFEST_FILE), text)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_through_json() {
        let tmp = std::env::temp_dir().join(format!("msoc-manifest-test-{}", std::process::id()));
        let mut ctx = RunContext::new(&tmp).unwrap();
        ctx.write_file("table.csv", "a,b\n1,2\n").unwrap();
        ctx.scalars.insert("k".into(), 0.5);
        ctx.note("note");
        let cfg = ExperimentConfig::default_for(ExperimentTag::LqrSweep);
        let m = ctx.finish(&cfg).unwrap();
        let loaded = Manifest::load(tmp.join(MANIFEST_FILE)).unwrap();
        assert_eq!(loaded.outputs, m.outputs);
        assert_eq!(loaded.config, cfg);
        std::fs::remove_dir_all(&tmp).ok();
    }
}
