#![allow(dead_code)]

use lookout_core::harness::{ExperimentConfig, Setup};
use lookout_core::learner::{CuriosityConfig, PpoConfig};

/// A configuration small enough to train in well under a second.
pub fn tiny(setup: Setup) -> ExperimentConfig {
    ExperimentConfig {
        episode_length: 40,
        total_steps: 1200,
        summary_freq: 400,
        eval_episodes: 2,
        ppo: PpoConfig {
            hidden_units: 16,
            batch_size: 64,
            buffer_size: 512,
            curiosity: Some(CuriosityConfig {
                encoding_size: 8,
                ..CuriosityConfig::default()
            }),
            ..PpoConfig::default()
        },
        ..ExperimentConfig::for_setup(setup)
    }
}

pub const TINY_TOML: &str = r#"
setup = "multi_agent"
episode_length = 40
total_steps = 1200
summary_freq = 400
eval_episodes = 2

[ppo]
hidden_units = 16
batch_size = 64
buffer_size = 512

[ppo.curiosity]
encoding_size = 8
"#;
