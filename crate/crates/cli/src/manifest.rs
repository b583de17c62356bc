use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::Command;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Record written next to every artifact. `invocation` holds the fully
/// resolved arguments, so `replay` can rerun the command exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub invocation: Command,
    /// Library-level parameters derived from the flags.
    pub resolved: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(invocation: &Command) -> Self {
        RunManifest {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command: invocation.name().to_string(),
            invocation: invocation.clone(),
            resolved: serde_json::Value::Null,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn resolved<T: Serialize>(mut self, value: &T) -> Result<Self> {
        self.resolved = serde_json::to_value(value)?;
        Ok(self)
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    /// Writes the manifest beside `artifact` and returns its path.
    pub fn write_beside(&self, artifact: &Path) -> Result<PathBuf> {
        let path = manifest_path(artifact);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n")
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("{}: not a valid run manifest", path.display()))
    }
}

/// `<artifact>.manifest.json`
pub fn manifest_path(artifact: &Path) -> PathBuf {
    sibling(artifact, "manifest.json")
}

/// `<artifact>.<suffix>`, keeping the full original file name.
pub fn sibling(artifact: &Path, suffix: &str) -> PathBuf {
    let mut name: OsString = artifact.file_name().map(OsString::from).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    artifact.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_keeps_the_extension() {
        assert_eq!(
            manifest_path(Path::new("out/a.csv")),
            PathBuf::from("out/a.csv.manifest.json")
        );
        assert_eq!(
            sibling(Path::new("m.model"), "history.csv"),
            PathBuf::from("m.model.history.csv")
        );
    }
}
