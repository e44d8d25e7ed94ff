use std::path::{Path, PathBuf};

use scuba_core::metrics::BatteryModel;
use scuba_core::Scenario;
use serde::{Deserialize, Serialize};

use crate::config::{OutputOptions, ScenarioFile};
use crate::error::{CliError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Written before any result. Holds everything needed to repeat the run bit for bit:
/// passing the manifest back to `scuba run` reproduces every artifact it lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// `run`, `sweep` or `reproduce <target>`.
    pub command: String,
    pub seed: u64,
    pub replicas: u32,
    pub scenario: Scenario,
    pub battery: BatteryModel,
    pub output: OutputOptions,
    /// Extra command parameters (sweep axis and values, reproduction scale).
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub parameters: serde_json::Map<String, serde_json::Value>,
    /// Artifact names relative to the manifest.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, file: &ScenarioFile, outputs: Vec<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: file.scenario.seed,
            replicas: file.replicas,
            scenario: file.scenario.clone(),
            battery: file.battery,
            output: file.output,
            parameters: serde_json::Map::new(),
            outputs,
        }
    }

    pub fn with_parameter(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).expect("parameters are plain data");
        self.parameters.insert(key.into(), v);
        self
    }

    pub fn file(&self) -> ScenarioFile {
        ScenarioFile {
            scenario: self.scenario.clone(),
            replicas: self.replicas,
            battery: self.battery,
            output: self.output,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(path.display().to_string(), format!("not a run manifest: {e}")))
    }
}

/// An output directory. Files are written whole, so a partial bundle never holds a
/// truncated artifact.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|source| CliError::Write {
            path: root.clone(),
            source,
        })?;
        Ok(Self { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn join(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn sub(&self, name: &str) -> Result<Self> {
        Self::create(self.root.join(name))
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("outputs serialize");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn write_manifest(&self, m: &RunManifest) -> Result<PathBuf> {
        self.write_json(MANIFEST_NAME, m)
    }
}
