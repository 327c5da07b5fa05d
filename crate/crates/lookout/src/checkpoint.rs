//! Versioned binary checkpoints: parameters, optimiser state, curriculum,
//! counters, the policy RNG position and the config.
//!
//! Layout: the 8-byte magic `LOOKCKPT`, a little-endian `u32` format
//! version, then a bincode payload. The config travels as TOML text inside
//! the payload.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use lookout_core::curriculum::Curriculum;
use lookout_core::harness::{ExperimentConfig, Trainer};
use lookout_core::learner::Learner;
use lookout_core::rng::RngState;
use serde::{Deserialize, Serialize};

use crate::config;

pub const MAGIC: &[u8; 8] = b"LOOKCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint payload: {0}")]
    Payload(#[from] bincode::Error),
    #[error("checkpoint config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub learner: Learner,
    pub curriculum: Option<Curriculum>,
    pub steps: u64,
    pub episodes: u64,
    pub policy_rng: RngState,
}

#[derive(Serialize, Deserialize)]
struct Payload {
    config_toml: String,
    learner: Learner,
    curriculum: Option<Curriculum>,
    steps: u64,
    episodes: u64,
    policy_rng: RngState,
}

impl Checkpoint {
    pub fn from_trainer(t: &Trainer) -> Self {
        Self {
            config: t.config.clone(),
            learner: t.learner.clone(),
            curriculum: t.curriculum.clone(),
            steps: t.steps,
            episodes: t.episodes,
            policy_rng: t.policy_rng_state(),
        }
    }

    pub fn into_trainer(self) -> lookout_core::Result<Trainer> {
        Trainer::resume(
            self.config,
            self.learner,
            self.curriculum,
            self.steps,
            self.episodes,
            &self.policy_rng,
        )
    }

    pub fn encode(&self) -> Result<Vec<u8>, CheckpointError> {
        let payload = Payload {
            config_toml: config::to_toml_string(&self.config).map_err(|e| CheckpointError::Config(e.to_string()))?,
            learner: self.learner.clone(),
            curriculum: self.curriculum.clone(),
            steps: self.steps,
            episodes: self.episodes,
            policy_rng: self.policy_rng,
        };
        let mut out = Vec::from(&MAGIC[..]);
        out.extend_from_slice(&VERSION.to_le_bytes());
        bincode::serialize_into(&mut out, &payload)?;
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes"));
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let p: Payload = bincode::deserialize(&bytes[12..])?;
        let config = config::from_toml_str(&p.config_toml, &config::Overrides::default())
            .map_err(|e| CheckpointError::Config(format!("{e:#}")))?;
        Ok(Self {
            config,
            learner: p.learner,
            curriculum: p.curriculum,
            steps: p.steps,
            episodes: p.episodes,
            policy_rng: p.policy_rng,
        })
    }

    pub fn read(path: &Path) -> Result<Self, CheckpointError> {
        Self::decode(&fs::read(path)?)
    }

    /// Writes through a temporary file so a crash never leaves a partial
    /// checkpoint under the final name.
    pub fn write(&self, path: &Path) -> Result<(), CheckpointError> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.encode()?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// A directory of `ckpt-<step>.bin` files keeping only the newest `keep`.
#[derive(Debug, Clone)]
pub struct CheckpointDir {
    dir: PathBuf,
    keep: usize,
}

impl CheckpointDir {
    pub fn new(dir: impl Into<PathBuf>, keep: usize) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, keep: keep.max(1) })
    }

    pub fn path_for(&self, steps: u64) -> PathBuf {
        self.dir.join(format!("ckpt-{steps:012}.bin"))
    }

    /// Checkpoint files sorted oldest first.
    pub fn list(&self) -> io::Result<Vec<PathBuf>> {
        let mut files: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("ckpt-") && n.ends_with(".bin"))
            })
            .collect();
        files.sort();
        Ok(files)
    }

    pub fn latest(&self) -> io::Result<Option<PathBuf>> {
        Ok(self.list()?.pop())
    }

    pub fn save(&self, ckpt: &Checkpoint) -> Result<PathBuf, CheckpointError> {
        let path = self.path_for(ckpt.steps);
        ckpt.write(&path)?;
        let files = self.list()?;
        for old in &files[..files.len().saturating_sub(self.keep)] {
            fs::remove_file(old)?;
        }
        Ok(path)
    }
}
