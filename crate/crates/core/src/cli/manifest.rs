//! Run manifests: enough to reproduce every output of a command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Infer,
    Coverage,
    Highdim,
    Timeseries,
}

impl CommandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandKind::Infer => "infer",
            CommandKind::Coverage => "coverage",
            CommandKind::Highdim => "highdim",
            CommandKind::Timeseries => "timeseries",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: CommandKind,
    pub preset: String,
    pub config: RunConfig,
    pub seed: u64,
    pub version: String,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub threads: usize,
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
