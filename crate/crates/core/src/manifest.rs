//! Run manifests: what a command read, wrote and was configured with.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    /// Hashes a file, or every file under a directory in path order.
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let mut h = Sha256::new();
        let mut bytes = 0;
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        for f in files {
            let mut file = fs::File::open(&f)?;
            let mut buf = [0u8; 1 << 16];
            loop {
                let n = file.read(&mut buf)?;
                if n == 0 {
                    break;
                }
                h.update(&buf[..n]);
                bytes += n as u64;
            }
        }
        Ok(FileDigest { path: path.to_path_buf(), sha256: hex::encode(h.finalize()), bytes })
    }
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if path.is_dir() {
        for entry in fs::read_dir(path)? {
            collect_files(&entry?.path(), out)?;
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timings: Timings,
    /// Command-specific details (training curves, sweep resources, ...).
    pub details: Value,
}

/// Collects a manifest while a command runs.
pub struct ManifestBuilder {
    command: String,
    argv: Vec<String>,
    seed: u64,
    config: RunConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    details: serde_json::Map<String, Value>,
    started: SystemTime,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn new(command: impl Into<String>, argv: Vec<String>, seed: u64, config: RunConfig) -> Self {
        ManifestBuilder {
            command: command.into(),
            argv,
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            details: serde_json::Map::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn finish(self) -> std::io::Result<RunManifest> {
        let digest = |ps: &[PathBuf]| ps.iter().map(|p| FileDigest::of(p)).collect::<std::io::Result<Vec<_>>>();
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            argv: self.argv,
            seed: self.seed,
            config: self.config,
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
            timings: Timings {
                started_unix_ms: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0),
                elapsed_ms: self.clock.elapsed().as_millis(),
            },
            details: Value::Object(self.details),
        })
    }
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.txt");
        fs::write(&f, b"abc").unwrap();
        let d = FileDigest::of(&f).unwrap();
        assert_eq!(d.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(d.bytes, 3);
        let mut b = ManifestBuilder::new("x", vec!["x".into()], 3, RunConfig::default());
        b.input(&f);
        b.detail("n", 5);
        let m = b.finish().unwrap();
        let p = dir.path().join("m.json");
        m.save(&p).unwrap();
        assert_eq!(RunManifest::load(&p).unwrap(), m);
        assert_eq!(m.details["n"], 5);
    }
}
