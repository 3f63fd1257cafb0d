//! Reproducibility manifest written next to every run's outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::Failure;

#[derive(Debug, Clone, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Wall-clock facts; the only part of a run that varies between repeats.
#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub started_unix: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: Config,
    pub laws: Vec<serde_json::Value>,
    pub seed: u64,
    pub code_version: String,
    pub outputs: Vec<OutputDigest>,
    pub timing: Timing,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Collects artifacts as they are written and seals them into a manifest.
pub struct Recorder {
    pub dir: PathBuf,
    started: SystemTime,
    outputs: Vec<OutputDigest>,
    laws: Vec<serde_json::Value>,
}

impl Recorder {
    pub fn new(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Resource(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), started: SystemTime::now(), outputs: Vec::new(), laws: Vec::new() })
    }

    pub fn law(&mut self, def: impl Serialize) {
        if let Ok(v) = serde_json::to_value(def) {
            self.laws.push(v);
        }
    }

    pub fn write_bytes(&mut self, file: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.dir.join(file);
        std::fs::write(&path, bytes).map_err(|e| Failure::Resource(format!("{}: {e}", path.display())))?;
        self.outputs.push(OutputDigest { file: file.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(path)
    }

    pub fn write_json(&mut self, file: &str, value: &impl Serialize) -> Result<PathBuf, Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Resource(e.to_string()))?;
        text.push('\n');
        self.write_bytes(file, text.as_bytes())
    }

    /// Writes `<stem>.manifest.json`.
    pub fn finish(self, stem: &str, command: Vec<String>, config: &Config) -> Result<PathBuf, Failure> {
        let now = SystemTime::now();
        let started_unix = self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let wall_seconds = now.duration_since(self.started).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let m = RunManifest {
            command,
            config: config.clone(),
            laws: self.laws,
            seed: config.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs,
            timing: Timing { started_unix, wall_seconds },
        };
        let path = self.dir.join(format!("{stem}.manifest.json"));
        let text = serde_json::to_string_pretty(&m).map_err(|e| Failure::Resource(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Failure::Resource(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
