use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one run. Only `timestamp_unix` and `duration_seconds` vary
/// between identical invocations.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Input files, verbatim.
    pub config: BTreeMap<String, String>,
    /// Effective flag values after overrides.
    pub flags: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub timestamp_unix: f64,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: BTreeMap::new(),
            flags: BTreeMap::new(),
            seed: None,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .unwrap_or(Duration::ZERO)
                .as_secs_f64(),
            outputs: Vec::new(),
            duration_seconds: 0.0,
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) {
        self.flags.insert(name.to_string(), value.to_string());
    }

    /// Writes to a temporary file and renames it into place, so a manifest
    /// is either complete or absent.
    pub fn write_atomic(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(&tmp, text)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}
