//! Reproducibility records written next to the outputs of mutating runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{FormatError, Result};

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub rng_algorithm: String,
    pub threads: Option<usize>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub version: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn hashes(paths: &[PathBuf]) -> Result<Vec<FileHash>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileHash {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// Collects run metadata; call [`Recorder::finish`] after the outputs exist.
pub struct Recorder {
    started: Instant,
    started_unix: u64,
    command_line: Vec<String>,
    threads: Option<usize>,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn start(command_line: Vec<String>, threads: Option<usize>) -> Self {
        Recorder {
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            command_line,
            threads,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_owned());
    }

    pub fn finish(self, outputs: &[PathBuf]) -> Result<RunManifest> {
        Ok(RunManifest {
            command_line: self.command_line,
            seeds: self.seeds,
            rng_algorithm: spqn_core::rng::RNG_ALGORITHM.to_string(),
            threads: self.threads,
            inputs: hashes(&self.inputs)?,
            outputs: hashes(outputs)?,
            started_unix_seconds: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

/// `OUT.manifest.json` next to the first output.
pub fn default_manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    crate::write_file(path, &(serde_json::to_string_pretty(manifest)? + "\n"))
}
