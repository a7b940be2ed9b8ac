use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::CmdResult;

/// Record of one command invocation, written next to its outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: Value,
    pub code_version: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub verdicts: Value,
}

impl RunManifest {
    pub fn new(command_line: Vec<String>, config: Value) -> Self {
        Self {
            command_line,
            config,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
            verdicts: Value::Null,
        }
    }

    pub fn write(&mut self, dir: &Path) -> CmdResult<()> {
        self.outputs.push("manifest.json".into());
        std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}
