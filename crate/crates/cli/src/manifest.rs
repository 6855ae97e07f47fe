//! Run manifests: a reproducibility record written next to every artifact.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a mutating command: argv, the effective
/// config, content digests of all inputs, and the seeds in play.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
    pub wall_clock_secs: f64,
    pub created_unix: u64,
}

pub struct ManifestBuilder {
    started: std::time::Instant,
    command: Vec<String>,
    config: serde_json::Value,
    inputs: Vec<InputDigest>,
    seeds: BTreeMap<String, u64>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command: Vec<String>) -> Self {
        ManifestBuilder {
            started: std::time::Instant::now(),
            command,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            seeds: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> &mut Self {
        self.config = serde_json::to_value(config).expect("config serializes");
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let bytes =
            std::fs::read(path).with_context(|| format!("file not found: {}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex,
        });
        Ok(self)
    }

    pub fn seed(&mut self, name: &str, value: u64) -> &mut Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    /// Writes `<primary_output>.manifest.json`.
    pub fn write(&self) -> Result<()> {
        let primary = self
            .outputs
            .first()
            .expect("manifest requires at least one output");
        let manifest = RunManifest {
            tool: "featrm".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.clone(),
            config: self.config.clone(),
            inputs: self
                .inputs
                .iter()
                .map(|i| InputDigest {
                    path: i.path.clone(),
                    sha256: i.sha256.clone(),
                })
                .collect(),
            seeds: self.seeds.clone(),
            outputs: self
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let path = manifest_path(primary);
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(())
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}
