//! `manifest.json`: what a run directory was produced from.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use lookout_core::harness::ExperimentConfig;
use lookout_core::towers::NeighborGraph;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scenario_file::ScenarioPin;

pub const MANIFEST_VERSION: u32 = 1;

/// SHA-256 over `blob <len>\0<bytes>`, the way git names blob objects.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub seed: String,
    pub difficulty: u8,
    pub terrain_checksum: String,
}

impl From<ScenarioPin> for ScenarioEntry {
    fn from(p: ScenarioPin) -> Self {
        Self {
            seed: p.seed.to_string(),
            difficulty: p.difficulty,
            terrain_checksum: format!("{:016x}", p.terrain_checksum),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    /// Content hash of `config.toml`.
    pub config_hash: String,
    /// Scenario of fixed-seed runs and of the fixed-seed evaluation.
    pub scenario: ScenarioEntry,
    /// Tower id to the ids it sends to.
    pub neighbor_graph: BTreeMap<String, Vec<usize>>,
    /// Content hashes of the output files, filled in when the run ends.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig, config_toml: &str, pin: ScenarioPin, graph: &NeighborGraph) -> Result<Self> {
        Ok(Self {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
            config_hash: content_hash(config_toml.as_bytes()),
            scenario: pin.into(),
            neighbor_graph: graph
                .edges
                .iter()
                .enumerate()
                .map(|(i, e)| (i.to_string(), e.clone()))
                .collect(),
            files: BTreeMap::new(),
        })
    }

    /// Records the content hash of each named file in `dir` that exists.
    pub fn hash_files(&mut self, dir: &Path, names: &[&str]) -> Result<()> {
        for name in names {
            let p = dir.join(name);
            if p.exists() {
                let bytes = std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
                self.files.insert((*name).into(), content_hash(&bytes));
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}
