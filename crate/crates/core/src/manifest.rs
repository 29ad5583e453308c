//! Run manifests: one JSON file per command run, written next to its outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector, program name excluded.
    pub args: Vec<String>,
    pub resolved_config: BTreeMap<String, Value>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub backends: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: &str, args: Vec<String>, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            args,
            resolved_config: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed,
            started_unix: unix_now(),
            finished_unix: None,
            backends: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let value = serde_json::to_value(value).unwrap_or(Value::Null);
        self.resolved_config.insert(key.to_string(), value);
        self
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.inputs.push(path.into());
        self
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.outputs.push(path.into());
        self
    }

    pub fn backend(&mut self, identity: impl Into<String>) -> &mut Self {
        self.backends.push(identity.into());
        self
    }

    /// Stamps the finish time and writes `manifest.json` into `dir`.
    pub fn finish(&mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix = Some(unix_now());
        fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
