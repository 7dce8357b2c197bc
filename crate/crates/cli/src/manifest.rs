//! Run manifests: everything needed to repeat a command.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::error::{io_error, CliError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub format_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub kernel: Value,
    pub budgets: Value,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub version: String,
}

pub struct ManifestBuilder {
    started: Instant,
    manifest: Manifest,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        ManifestBuilder {
            started: Instant::now(),
            manifest: Manifest {
                format_version: FORMAT_VERSION,
                command: command.to_string(),
                argv: std::env::args().collect(),
                seed,
                inputs: BTreeMap::new(),
                kernel: Value::Null,
                budgets: Value::Null,
                outputs: Vec::new(),
                wall_clock_seconds: 0.0,
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
        }
    }

    pub fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.manifest.inputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn kernel(mut self, kernel: impl Serialize) -> Self {
        self.manifest.kernel = serde_json::to_value(kernel).unwrap_or(Value::Null);
        self
    }

    pub fn budgets(mut self, budgets: Value) -> Self {
        self.manifest.budgets = budgets;
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.manifest.outputs.push(path.display().to_string());
        self
    }

    /// Writes the manifest to `path`.
    pub fn write(mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| io_error(path, e))
    }
}

/// Manifest location for a single-file output: `<file>.manifest.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}
