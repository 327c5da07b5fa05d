//! Experiment configuration, the episode loop, training and evaluation.

mod episode;
mod eval;
mod train;

use alloc::string::String;
use core::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use episode::{
    run_episode, Controller, EpisodeAccumulator, EpisodeMetrics, EpisodeSpec, GreedyController, PolicyController,
};
pub use eval::{evaluate, evaluate_both, held_out_seed, EvalReport, EvalSpec, EvalStats};
pub use train::{LessonChange, SummaryRow, TrainObserver, TrainReport, Trainer};

use crate::curriculum::{default_lessons, Lesson, DEFAULT_SMOOTHING};
use crate::env::EnvConfig;
use crate::learner::PpoConfig;
use crate::policies::ActionLayout;
use crate::{Error, Result, EPISODE_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    Greedy,
    SingleAgent,
    MultiAgent,
    MultiAgentAc,
}

impl Setup {
    pub const ALL: [Setup; 4] = [Setup::Greedy, Setup::SingleAgent, Setup::MultiAgent, Setup::MultiAgentAc];

    pub fn name(self) -> &'static str {
        match self {
            Setup::Greedy => "greedy",
            Setup::SingleAgent => "single_agent",
            Setup::MultiAgent => "multi_agent",
            Setup::MultiAgentAc => "multi_agent_ac",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }

    /// Observation/action layout of the learned policy; the greedy
    /// baseline acts per tower like the multi-agent setup.
    pub fn layout(self) -> ActionLayout {
        match self {
            Setup::SingleAgent => ActionLayout::SingleAgent,
            _ => ActionLayout::MultiAgent,
        }
    }

    pub fn is_learned(self) -> bool {
        self != Setup::Greedy
    }

    pub fn uses_graph_encoder(self) -> bool {
        matches!(self, Setup::MultiAgent | Setup::MultiAgentAc)
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scenario seed per episode: one fixed seed, or a fresh derived seed for
/// every episode (written `"inf"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedMode {
    Fixed(u64),
    PerEpisode,
}

/// Terrain difficulty: fixed, or driven by the curriculum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifficultyMode {
    Fixed(u8),
    Curriculum,
}

impl SeedMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inf" | "random" => Some(SeedMode::PerEpisode),
            _ => s.parse().ok().map(SeedMode::Fixed),
        }
    }
}

impl DifficultyMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "curriculum" => Some(DifficultyMode::Curriculum),
            _ => s.parse().ok().map(DifficultyMode::Fixed),
        }
    }
}

impl fmt::Display for SeedMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedMode::Fixed(s) => write!(f, "{s}"),
            SeedMode::PerEpisode => f.write_str("inf"),
        }
    }
}

impl fmt::Display for DifficultyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DifficultyMode::Fixed(d) => write!(f, "{d}"),
            DifficultyMode::Curriculum => f.write_str("curriculum"),
        }
    }
}

impl Serialize for SeedMode {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            SeedMode::Fixed(v) => s.serialize_u64(*v),
            SeedMode::PerEpisode => s.serialize_str("inf"),
        }
    }
}

impl Serialize for DifficultyMode {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            DifficultyMode::Fixed(v) => s.serialize_u8(*v),
            DifficultyMode::Curriculum => s.serialize_str("curriculum"),
        }
    }
}

struct ModeVisitor<T>(fn(&str) -> Option<T>, fn(u64) -> Option<T>, &'static str);

impl<T> Visitor<'_> for ModeVisitor<T> {
    type Value = T;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.2)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> core::result::Result<T, E> {
        (self.1)(v).ok_or_else(|| E::custom(self.2))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> core::result::Result<T, E> {
        let v = u64::try_from(v).map_err(|_| E::custom(self.2))?;
        self.visit_u64(v)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> core::result::Result<T, E> {
        (self.0)(v).ok_or_else(|| E::custom(self.2))
    }
}

impl<'de> Deserialize<'de> for SeedMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        d.deserialize_any(ModeVisitor(
            SeedMode::parse,
            |v| Some(SeedMode::Fixed(v)),
            "a seed integer or \"inf\"",
        ))
    }
}

impl<'de> Deserialize<'de> for DifficultyMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        d.deserialize_any(ModeVisitor(
            DifficultyMode::parse,
            |v| u8::try_from(v).ok().map(DifficultyMode::Fixed),
            "a difficulty 1-10 or \"curriculum\"",
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumConfig {
    pub smoothing: f64,
    pub lessons: alloc::vec::Vec<Lesson>,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            smoothing: DEFAULT_SMOOTHING,
            lessons: default_lessons(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setup: Setup,
    /// Defaults to seed 0, or per-episode seeds for `multi_agent_ac`.
    pub seed: Option<SeedMode>,
    /// Defaults to 1, or the curriculum for `multi_agent_ac`.
    pub difficulty: Option<DifficultyMode>,
    pub episode_length: u32,
    pub total_steps: u64,
    pub eval_episodes: usize,
    /// Difficulty of evaluation episodes when training used the curriculum.
    pub eval_difficulty: u8,
    pub summary_freq: u64,
    /// Checkpoints kept on disk; older ones are deleted.
    pub keep_checkpoints: usize,
    pub master_seed: u64,
    pub out_dir: String,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub curriculum: CurriculumConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            setup: Setup::MultiAgent,
            seed: None,
            difficulty: None,
            episode_length: EPISODE_LENGTH,
            total_steps: 500_000,
            eval_episodes: 20,
            eval_difficulty: 1,
            summary_freq: 24_300,
            keep_checkpoints: 5,
            master_seed: 0,
            out_dir: String::from("runs"),
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            curriculum: CurriculumConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults for `setup`; the multi-agent run logs every 24300 steps,
    /// the others every 40500.
    pub fn for_setup(setup: Setup) -> Self {
        let summary_freq = match setup {
            Setup::MultiAgent | Setup::Greedy => 24_300,
            Setup::SingleAgent | Setup::MultiAgentAc => 40_500,
        };
        Self {
            setup,
            summary_freq,
            ..Self::default()
        }
    }

    pub fn seed_mode(&self) -> SeedMode {
        match (self.seed, self.setup) {
            (Some(s), _) => s,
            (None, Setup::MultiAgentAc) => SeedMode::PerEpisode,
            (None, _) => SeedMode::Fixed(0),
        }
    }

    pub fn difficulty_mode(&self) -> DifficultyMode {
        match (self.difficulty, self.setup) {
            (Some(d), _) => d,
            (None, Setup::MultiAgentAc) => DifficultyMode::Curriculum,
            (None, _) => DifficultyMode::Fixed(1),
        }
    }

    /// Environment settings with the configured episode length.
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            episode_length: self.episode_length,
            ..self.env
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.setup == Setup::MultiAgentAc
            && (self.seed_mode() != SeedMode::PerEpisode || self.difficulty_mode() != DifficultyMode::Curriculum)
        {
            return Err(Error::Config(
                "multi_agent_ac trains on per-episode seeds with the curriculum".into(),
            ));
        }
        if let DifficultyMode::Fixed(d) = self.difficulty_mode() {
            if !(1..=10).contains(&d) {
                return Err(Error::InvalidDifficulty(d));
            }
        }
        if !(1..=10).contains(&self.eval_difficulty) {
            return Err(Error::InvalidDifficulty(self.eval_difficulty));
        }
        if self.episode_length == 0 || self.summary_freq == 0 || self.keep_checkpoints == 0 {
            return Err(Error::Config("episode length, summary frequency and kept checkpoints must be positive".into()));
        }
        if self.difficulty_mode() == DifficultyMode::Curriculum {
            let c = &self.curriculum;
            if c.lessons.is_empty() || !(0.0..1.0).contains(&c.smoothing) {
                return Err(Error::Config("curriculum needs lessons and smoothing in [0, 1)".into()));
            }
            if let Some(l) = c.lessons.iter().find(|l| !(1..=10).contains(&l.value)) {
                return Err(Error::InvalidDifficulty(l.value));
            }
        }
        self.ppo.validate()
    }

    /// Difficulty used when evaluating fixed-difficulty episodes.
    pub fn evaluation_difficulty(&self) -> u8 {
        match self.difficulty_mode() {
            DifficultyMode::Fixed(d) => d,
            DifficultyMode::Curriculum => self.eval_difficulty,
        }
    }

    /// Scenario seed for the fixed-seed evaluation column.
    pub fn evaluation_seed(&self) -> u64 {
        match self.seed_mode() {
            SeedMode::Fixed(s) => s,
            SeedMode::PerEpisode => 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ac_defaults_to_random_seeds_and_curriculum() {
        let c = ExperimentConfig::for_setup(Setup::MultiAgentAc);
        assert_eq!(c.seed_mode(), SeedMode::PerEpisode);
        assert_eq!(c.difficulty_mode(), DifficultyMode::Curriculum);
        assert!(c.validate().is_ok());
        let bad = ExperimentConfig {
            seed: Some(SeedMode::Fixed(0)),
            ..c
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn plain_setups_default_to_seed0_difficulty1() {
        for s in [Setup::Greedy, Setup::SingleAgent, Setup::MultiAgent] {
            let c = ExperimentConfig::for_setup(s);
            assert_eq!(c.seed_mode(), SeedMode::Fixed(0));
            assert_eq!(c.difficulty_mode(), DifficultyMode::Fixed(1));
            assert!(c.validate().is_ok());
        }
    }

    #[test]
    fn summary_frequency_follows_setup() {
        assert_eq!(ExperimentConfig::for_setup(Setup::MultiAgent).summary_freq, 24_300);
        assert_eq!(ExperimentConfig::for_setup(Setup::SingleAgent).summary_freq, 40_500);
        assert_eq!(ExperimentConfig::for_setup(Setup::MultiAgentAc).summary_freq, 40_500);
        assert_eq!(ExperimentConfig::default().keep_checkpoints, 5);
    }

    #[test]
    fn invalid_difficulty_rejected() {
        let c = ExperimentConfig {
            difficulty: Some(DifficultyMode::Fixed(11)),
            ..ExperimentConfig::default()
        };
        assert_eq!(c.validate(), Err(Error::InvalidDifficulty(11)));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(SeedMode::parse("inf"), Some(SeedMode::PerEpisode));
        assert_eq!(SeedMode::parse("42"), Some(SeedMode::Fixed(42)));
        assert_eq!(SeedMode::parse("x"), None);
        assert_eq!(DifficultyMode::parse("curriculum"), Some(DifficultyMode::Curriculum));
        assert_eq!(DifficultyMode::parse("3"), Some(DifficultyMode::Fixed(3)));
        for s in Setup::ALL {
            assert_eq!(Setup::parse(s.name()), Some(s));
        }
    }
}
