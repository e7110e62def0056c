//! Reproducibility record written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub duration_secs: f64,
}

pub fn digest_file(path: &Path) -> Result<FileDigest, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    Ok(FileDigest { path: path.display().to_string(), sha256: hex(&Sha256::digest(&bytes)), bytes: bytes.len() as u64 })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects inputs and outputs while a command runs.
pub struct Recorder {
    command: String,
    out_dir: PathBuf,
    started: Instant,
    inputs: Vec<FileDigest>,
    outputs: Vec<String>,
    seeds: Vec<u64>,
}

impl Recorder {
    pub fn new(command: &str, out_dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::Output(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(Recorder {
            command: command.to_string(),
            out_dir: out_dir.to_path_buf(),
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let d = digest_file(path)?;
        if !self.inputs.iter().any(|i| i.path == d.path) {
            self.inputs.push(d);
        }
        Ok(())
    }

    pub fn seed(&mut self, seed: u64) {
        self.seeds.push(seed);
    }

    /// Path of an output file inside the output directory.
    pub fn output(&mut self, name: &str) -> PathBuf {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        self.out_dir.join(name)
    }

    /// Create an output file for writing.
    pub fn create(&mut self, name: &str) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
        let path = self.output(name);
        let f = std::fs::File::create(&path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        Ok(std::io::BufWriter::new(f))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.output(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
    }

    pub fn finish<C: Serialize>(self, config: &C) -> Result<RunManifest, CliError> {
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for name in &self.outputs {
            let mut d = digest_file(&self.out_dir.join(name))?;
            d.path = name.clone();
            outputs.push(d);
        }
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).map_err(|e| CliError::Output(e.to_string()))?,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let path = self.out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        Ok(manifest)
    }
}
