use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};

/// Record of one invocation and everything it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seeds: Vec<u64>,
    pub version: String,
    pub piece_budget: usize,
    /// Paths relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub wall_time: f64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            args: std::env::args().collect(),
            seeds: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            piece_budget: chaos_sep::pl::piece_budget_from_env(),
            outputs: Vec::new(),
            wall_time: 0.0,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
