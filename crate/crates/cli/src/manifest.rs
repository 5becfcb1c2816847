//! Reproducibility manifest written alongside every output file.

use crate::config::ToolConfig;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub output: String,
    pub seed: Option<u64>,
    pub config: ToolConfig,
    pub wall_time_s: f64,
}

pub struct ManifestBuilder {
    command: String,
    inputs: BTreeMap<String, String>,
    seed: Option<u64>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            seed: None,
            started: Instant::now(),
        }
    }

    pub fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.to_string(), path.display().to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Write `<output stem>.manifest.json` next to the output file.
    pub fn write(self, output: &Path, config: &ToolConfig) -> Result<(), String> {
        let manifest = RunManifest {
            command: self.command,
            inputs: self.inputs,
            output: output.display().to_string(),
            seed: self.seed,
            config: config.clone(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let path = manifest_path(output);
        corridor_core::io::write_json(&path, &manifest).map_err(|e| e.to_string())
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    output.with_file_name(format!("{stem}.manifest.json"))
}
