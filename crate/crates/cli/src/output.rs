use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

static THREADS: AtomicUsize = AtomicUsize::new(0);

/// Worker threads reported in the manifest. Thread count never changes
/// output bytes, so it is kept out of the resolved config.
pub fn set_threads(n: usize) {
    THREADS.store(n, Ordering::Relaxed);
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub subcommand: &'a str,
    pub config_digest: String,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub wall_clock_seconds: f64,
    pub threads: usize,
}

/// Output directory that remembers what was written to it.
pub struct OutDir {
    root: PathBuf,
    started: Instant,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), started: Instant::now(), inputs: vec![], outputs: vec![] })
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(FileEntry { path: rel.to_string(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
        text.push(b'\n');
        self.write(rel, &text)
    }

    pub fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(FileEntry {
            path: path.display().to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
    }

    /// Writes `manifest.json`; the manifest does not list itself.
    pub fn finish(mut self, subcommand: &str, config_digest: String) -> Result<(), CliError> {
        let outputs = std::mem::take(&mut self.outputs);
        let inputs = std::mem::take(&mut self.inputs);
        let m = Manifest {
            subcommand,
            config_digest,
            inputs,
            outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            threads: THREADS.load(Ordering::Relaxed),
        };
        self.write_json("manifest.json", &m)
    }
}
