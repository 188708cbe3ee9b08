use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Command;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of one invocation: enough to rerun it and to check its files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Command,
    pub seed: u64,
    pub artifact_version: String,
    pub rng: String,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the run directory.
    pub outputs: Vec<FileDigest>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// A per-invocation output directory that tracks what was read and written.
pub struct RunDir {
    root: PathBuf,
    started: u64,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create run directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), started: unix_now(), inputs: Vec::new(), outputs: Vec::new() })
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let shown = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        self.inputs.push(FileDigest { path: shown.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.retain(|f| f.path != name);
        self.outputs.push(FileDigest { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn finish(self, config: &Command, seed: u64) -> Result<RunManifest> {
        let m = RunManifest {
            command: config.name().to_string(),
            config: config.clone(),
            seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            rng: detchoice::rng::ALGORITHM.to_string(),
            inputs: self.inputs,
            outputs: self.outputs,
            started_unix: self.started,
            finished_unix: unix_now(),
        };
        let mut bytes = serde_json::to_vec_pretty(&m)?;
        bytes.push(b'\n');
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(m)
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed manifest {}", path.display()))
    }

    /// Fails if any recorded input no longer matches its digest.
    pub fn check_inputs(&self) -> Result<()> {
        for f in &self.inputs {
            let now = digest_file(Path::new(&f.path))?;
            if now != f.sha256 {
                bail!("input {} changed since the run (sha256 {} recorded, {} now)", f.path, f.sha256, now);
            }
        }
        Ok(())
    }

    /// Output files under `dir` whose digests differ from the recorded ones.
    pub fn differing_outputs(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|f| digest_file(&dir.join(&f.path)).map(|d| d != f.sha256).unwrap_or(true))
            .map(|f| f.path.clone())
            .collect()
    }
}
