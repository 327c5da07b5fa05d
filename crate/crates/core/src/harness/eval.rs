//! Evaluation over fixed-seed and held-out random-seed episodes.

use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::episode::{run_episode, Controller, EpisodeMetrics, EpisodeSpec};
use super::{ExperimentConfig, SeedMode};
use crate::env::{EnvConfig, Scenario};
use crate::rng::{derive_seed, tag};
use crate::scenario::ScenarioConfig;
use crate::stats::MeanStd;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    /// `PerEpisode` draws held-out scenario seeds from the evaluation
    /// stream, disjoint from the training stream.
    pub seed: SeedMode,
    pub difficulty: u8,
    pub episodes: usize,
    pub master_seed: u64,
    pub env: EnvConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub reward: MeanStd,
    pub performance: MeanStd,
    pub episodes: Vec<EpisodeMetrics>,
}

impl EvalStats {
    pub fn from_episodes(episodes: Vec<EpisodeMetrics>) -> Self {
        let r: Vec<f64> = episodes.iter().map(|m| m.reward).collect();
        let p: Vec<f64> = episodes.iter().map(|m| m.mean_performance).collect();
        Self {
            reward: MeanStd::of(&r),
            performance: MeanStd::of(&p),
            episodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fixed_seed: u64,
    pub fixed: EvalStats,
    pub random: EvalStats,
}

/// Scenario seed of held-out evaluation episode `i`.
pub fn held_out_seed(master: u64, i: u64) -> u64 {
    derive_seed(master, tag::EVAL, i)
}

/// Runs `spec.episodes` episodes of `controller`.
pub fn evaluate(controller: &mut dyn Controller, spec: &EvalSpec) -> Result<EvalStats> {
    if spec.episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let eval_master = derive_seed(spec.master_seed, tag::EVAL, u64::MAX);
    let mut cached: Option<Arc<Scenario>> = None;
    let mut out = Vec::with_capacity(spec.episodes);
    for i in 0..spec.episodes as u64 {
        let seed = match spec.seed {
            SeedMode::Fixed(s) => s,
            SeedMode::PerEpisode => held_out_seed(spec.master_seed, i),
        };
        let scenario = match &cached {
            Some(s) if s.config.seed == seed && s.config.difficulty == spec.difficulty => s.clone(),
            _ => {
                let s = Arc::new(Scenario::generate(ScenarioConfig::new(seed, spec.difficulty)?)?);
                cached = Some(s.clone());
                s
            }
        };
        let ep = EpisodeSpec {
            episode: i,
            scenario,
            env: spec.env,
            fire_seed: derive_seed(eval_master, tag::FIRE, i),
            policy_seed: derive_seed(eval_master, tag::POLICY, i),
        };
        out.push(run_episode(&ep, controller, None)?);
    }
    Ok(EvalStats::from_episodes(out))
}

/// Fixed-seed and random-seed columns for an experiment's settings.
pub fn evaluate_both(controller: &mut dyn Controller, config: &ExperimentConfig, episodes: usize) -> Result<EvalReport> {
    let base = EvalSpec {
        seed: SeedMode::Fixed(config.evaluation_seed()),
        difficulty: config.evaluation_difficulty(),
        episodes,
        master_seed: config.master_seed,
        env: config.env_config(),
    };
    let fixed = evaluate(controller, &base)?;
    let random = evaluate(
        controller,
        &EvalSpec {
            seed: SeedMode::PerEpisode,
            ..base
        },
    )?;
    Ok(EvalReport {
        fixed_seed: config.evaluation_seed(),
        fixed,
        random,
    })
}
