use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::io::{read_bytes, sha256_hex, write_text};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of_bytes(path: &Path, bytes: &[u8]) -> Self {
        Self { path: path.display().to_string(), sha256: sha256_hex(bytes) }
    }

    pub fn of_file(path: &Path) -> CliResult<Self> {
        Ok(Self::of_bytes(path, &read_bytes(path)?))
    }
}

/// Everything needed to re-run a subcommand and check its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub subcommand: String,
    pub software_version: String,
    pub command_line: Vec<String>,
    /// Seed behind every random choice, when the subcommand uses one.
    pub seed: Option<u64>,
    /// Resolved configuration with every default filled in.
    pub config: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub results: Value,
    pub wall_time_seconds: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: Option<u64>, config: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            subcommand: subcommand.to_owned(),
            software_version: env!("CARGO_PKG_VERSION").to_owned(),
            command_line: std::env::args().collect(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            results: Value::Null,
            wall_time_seconds: 0.0,
        }
    }

    /// Records digests of `names` inside `dir` as outputs.
    pub fn add_outputs(&mut self, dir: &Path, names: &[String]) -> CliResult<()> {
        for name in names {
            let digest = FileDigest::of_file(&dir.join(name))?;
            self.outputs.push(FileDigest { path: name.clone(), ..digest });
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Other(e.to_string()))?;
        write_text(&dir.join("manifest.json"), &(text + "\n"))
    }
}
