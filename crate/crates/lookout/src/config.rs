//! TOML experiment configs with command-line overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use lookout_core::harness::{DifficultyMode, ExperimentConfig, SeedMode, Setup};
use toml::{Table, Value};

/// Values given on the command line; each one replaces the config file's.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub setup: Option<Setup>,
    pub seed: Option<SeedMode>,
    pub difficulty: Option<DifficultyMode>,
    pub total_steps: Option<u64>,
    pub episodes: Option<usize>,
    pub out: Option<String>,
    pub master_seed: Option<u64>,
}

impl Overrides {
    fn apply(&self, table: &mut Table) -> Result<()> {
        let mut set = |k: &str, v: Value| {
            table.insert(k.to_string(), v);
        };
        if let Some(s) = self.setup {
            set("setup", Value::String(s.name().into()));
        }
        if let Some(s) = self.seed {
            set("seed", Value::try_from(s)?);
        }
        if let Some(d) = self.difficulty {
            set("difficulty", Value::try_from(d)?);
        }
        if let Some(n) = self.total_steps {
            set("total_steps", Value::Integer(to_i64(n)?));
        }
        if let Some(n) = self.episodes {
            set("eval_episodes", Value::Integer(to_i64(n as u64)?));
        }
        if let Some(o) = &self.out {
            set("out_dir", Value::String(o.clone()));
        }
        if let Some(m) = self.master_seed {
            set("master_seed", Value::Integer(to_i64(m)?));
        }
        Ok(())
    }
}

fn to_i64(v: u64) -> Result<i64> {
    i64::try_from(v).with_context(|| format!("{v} does not fit a TOML integer"))
}

/// Recursively lays `top` over `base`.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Builds a config from TOML text and overrides. Keys missing from the
/// text take the defaults of the chosen setup.
pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut table: Table = text.parse().context("parsing config TOML")?;
    overrides.apply(&mut table)?;
    let setup = match table.get("setup") {
        None => Setup::MultiAgent,
        Some(Value::String(s)) => match Setup::parse(s) {
            Some(s) => s,
            None => bail!("unknown setup {s:?}"),
        },
        Some(v) => bail!("setup must be a string, got {v}"),
    };
    let mut base = match Value::try_from(ExperimentConfig::for_setup(setup))? {
        Value::Table(t) => t,
        _ => unreachable!("configs serialize to tables"),
    };
    merge(&mut base, table);
    let config: ExperimentConfig = Value::Table(base).try_into().context("invalid config")?;
    Ok(config)
}

/// Reads `path` if given, applies overrides and validates the result.
pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let config = from_toml_str(&text, overrides)?;
    config.validate()?;
    Ok(config)
}

pub fn to_toml_string(config: &ExperimentConfig) -> Result<String> {
    Ok(toml::to_string_pretty(config)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = from_toml_str("", &Overrides::default()).unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn setup_selects_its_defaults() {
        let c = from_toml_str("setup = \"single_agent\"", &Overrides::default()).unwrap();
        assert_eq!(c.summary_freq, 40_500);
        let c = from_toml_str("setup = \"single_agent\"\nsummary_freq = 7", &Overrides::default()).unwrap();
        assert_eq!(c.summary_freq, 7);
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::for_setup(Setup::MultiAgentAc);
        c.ppo.hidden_units = 64;
        c.seed = Some(SeedMode::PerEpisode);
        let text = to_toml_string(&c).unwrap();
        assert_eq!(from_toml_str(&text, &Overrides::default()).unwrap(), c);
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            seed: Some(SeedMode::Fixed(3)),
            difficulty: Some(DifficultyMode::Fixed(4)),
            total_steps: Some(99),
            ..Overrides::default()
        };
        let c = from_toml_str("total_steps = 5\n[ppo]\nhidden_units = 8", &o).unwrap();
        assert_eq!(c.total_steps, 99);
        assert_eq!(c.seed_mode(), SeedMode::Fixed(3));
        assert_eq!(c.difficulty_mode(), DifficultyMode::Fixed(4));
        assert_eq!(c.ppo.hidden_units, 8);
        assert_eq!(c.ppo.batch_size, 128);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(from_toml_str("setup = \"nope\"", &Overrides::default()).is_err());
        assert!(from_toml_str("seed = \"x\"", &Overrides::default()).is_err());
        assert!(from_toml_str("unknown_key = [", &Overrides::default()).is_err());
    }
}
