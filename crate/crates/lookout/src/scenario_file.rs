//! Scenario pins: a small TOML file naming a scenario by seed and
//! difficulty, with a terrain checksum that is verified on import.
//!
//! ```toml
//! format = "lookout-scenario"
//! version = 1
//! seed = "0"
//! difficulty = 1
//! terrain_checksum = "9f0c2a7e5b1d3c48"
//! ```
//!
//! The seed is a decimal string because TOML integers stop at `i64::MAX`.

use std::path::Path;

use lookout_core::env::Scenario;
use lookout_core::scenario::ScenarioConfig;
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "lookout-scenario";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioFileError {
    #[error("not a scenario file (format {0:?})")]
    Format(String),
    #[error("unsupported scenario file version {0}")]
    Version(u32),
    #[error("bad field {0}")]
    Field(&'static str),
    #[error("terrain checksum mismatch: file has {expected:016x}, generated {actual:016x}")]
    Checksum { expected: u64, actual: u64 },
    #[error(transparent)]
    Core(#[from] lookout_core::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    TomlWrite(#[from] toml::ser::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioPin {
    pub seed: u64,
    pub difficulty: u8,
    pub terrain_checksum: u64,
}

#[derive(Serialize, Deserialize)]
struct Raw {
    format: String,
    version: u32,
    seed: String,
    difficulty: u8,
    terrain_checksum: String,
}

impl ScenarioPin {
    pub fn of(scenario: &Scenario) -> Self {
        Self {
            seed: scenario.config.seed,
            difficulty: scenario.config.difficulty,
            terrain_checksum: scenario.terrain.checksum(),
        }
    }

    pub fn to_toml(&self) -> Result<String, ScenarioFileError> {
        Ok(toml::to_string(&Raw {
            format: FORMAT.into(),
            version: VERSION,
            seed: self.seed.to_string(),
            difficulty: self.difficulty,
            terrain_checksum: format!("{:016x}", self.terrain_checksum),
        })?)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioFileError> {
        let raw: Raw = toml::from_str(text)?;
        if raw.format != FORMAT {
            return Err(ScenarioFileError::Format(raw.format));
        }
        if raw.version != VERSION {
            return Err(ScenarioFileError::Version(raw.version));
        }
        Ok(Self {
            seed: raw.seed.parse().map_err(|_| ScenarioFileError::Field("seed"))?,
            difficulty: raw.difficulty,
            terrain_checksum: u64::from_str_radix(&raw.terrain_checksum, 16)
                .map_err(|_| ScenarioFileError::Field("terrain_checksum"))?,
        })
    }

    /// Regenerates the scenario and checks it matches the pin.
    pub fn generate(&self) -> Result<Scenario, ScenarioFileError> {
        let s = Scenario::generate(ScenarioConfig::new(self.seed, self.difficulty)?)?;
        let actual = s.terrain.checksum();
        if actual != self.terrain_checksum {
            return Err(ScenarioFileError::Checksum {
                expected: self.terrain_checksum,
                actual,
            });
        }
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self, ScenarioFileError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), ScenarioFileError> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}
