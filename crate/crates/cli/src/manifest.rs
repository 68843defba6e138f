use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Written last by every command that produces files.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub parameters: serde_json::Value,
    pub seeds: Vec<u64>,
    /// Every file the command wrote, the manifest included.
    pub outputs: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(command: String, config_path: Option<&Path>, parameters: serde_json::Value, seeds: Vec<u64>) -> Self {
        Self {
            command,
            config_path: config_path.map(Path::to_path_buf),
            parameters,
            seeds,
            outputs: Vec::new(),
            started_at: now(),
            finished_at: String::new(),
        }
    }

    pub fn write(mut self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(MANIFEST_NAME);
        self.outputs.push(path.clone());
        self.finished_at = now();
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
