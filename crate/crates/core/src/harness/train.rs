//! The training driver: rollouts into the buffer, PPO updates, the
//! curriculum and periodic summary rows.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::episode::{decode_actions, EpisodeAccumulator, EpisodeMetrics, EpisodeSpec};
use super::{DifficultyMode, ExperimentConfig, SeedMode};
use crate::curriculum::Curriculum;
use crate::env::{Environment, Scenario};
use crate::learner::{linear_lr, ForwardCache, Learner, RolloutBuffer, Trajectory, UpdateStats};
use crate::policies::{ActionLayout, Observer};
use crate::rng::{self, derive_seed, tag, Rng, RngState};
use crate::scenario::ScenarioConfig;
use crate::stats::MeanStd;
use crate::{Error, Result};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub step: u64,
    pub episodes: u64,
    pub updates: u64,
    /// One-based lesson number, 0 without a curriculum.
    pub lesson: usize,
    pub difficulty: u8,
    /// Episodes finished since the previous row.
    pub window_episodes: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_performance: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub learning_rate: f64,
    pub mean_intrinsic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LessonChange {
    pub step: u64,
    pub episode: u64,
    /// One-based lesson numbers.
    pub from: usize,
    pub to: usize,
    pub smoothed_reward: f64,
}

/// Hooks for logging and checkpointing. Every method defaults to a no-op.
pub trait TrainObserver {
    fn on_episode(&mut self, _metrics: &EpisodeMetrics) -> Result<()> {
        Ok(())
    }

    fn on_update(&mut self, _step: u64, _stats: &UpdateStats) -> Result<()> {
        Ok(())
    }

    fn on_lesson(&mut self, _change: &LessonChange) -> Result<()> {
        Ok(())
    }

    fn on_summary(&mut self, _row: &SummaryRow, _trainer: &Trainer) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: u64,
    pub episodes: u64,
    pub updates: u64,
    pub summaries: usize,
    pub lesson_changes: Vec<LessonChange>,
}

/// Resumable training state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: ExperimentConfig,
    pub learner: Learner,
    pub curriculum: Option<Curriculum>,
    /// Agent-steps taken so far.
    pub steps: u64,
    /// Episodes started so far.
    pub episodes: u64,
    policy_rng: Rng,
    scenario: Option<Arc<Scenario>>,
    last_update: UpdateStats,
    last_mean_intrinsic: f64,
    window: Vec<EpisodeMetrics>,
    last_mean: f64,
}

impl Trainer {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        if !config.setup.is_learned() {
            return Err(Error::Config("the greedy setup has nothing to train".into()));
        }
        let layout = config.setup.layout();
        let learner = Learner::new(
            config.ppo.clone(),
            layout.observation_size(),
            layout.branches(),
            config.setup.uses_graph_encoder(),
            config.master_seed,
        )?;
        let curriculum = (config.difficulty_mode() == DifficultyMode::Curriculum)
            .then(|| Curriculum::new(config.curriculum.lessons.clone(), config.curriculum.smoothing));
        Ok(Self {
            policy_rng: rng::derived_stream(config.master_seed, tag::POLICY, 0),
            config,
            learner,
            curriculum,
            steps: 0,
            episodes: 0,
            scenario: None,
            last_update: UpdateStats::default(),
            last_mean_intrinsic: 0.0,
            window: Vec::new(),
            last_mean: 0.0,
        })
    }

    /// Rebuilds a trainer from checkpointed state; training continues with
    /// a fresh episode.
    pub fn resume(
        config: ExperimentConfig,
        learner: Learner,
        curriculum: Option<Curriculum>,
        steps: u64,
        episodes: u64,
        policy_rng: &RngState,
    ) -> Result<Self> {
        let mut t = Self::new(config)?;
        if learner.network != t.learner.network {
            return Err(Error::Config("checkpoint network does not match the configuration".into()));
        }
        t.learner = learner;
        if curriculum.is_some() {
            t.curriculum = curriculum;
        }
        t.steps = steps;
        t.episodes = episodes;
        t.policy_rng = policy_rng.restore();
        Ok(t)
    }

    pub fn policy_rng_state(&self) -> RngState {
        RngState::capture(&self.policy_rng)
    }

    fn difficulty(&self) -> u8 {
        match (self.config.difficulty_mode(), &self.curriculum) {
            (DifficultyMode::Fixed(d), _) => d,
            (DifficultyMode::Curriculum, Some(c)) => c.current_difficulty(),
            (DifficultyMode::Curriculum, None) => 1,
        }
    }

    /// Scenario, fire seed and difficulty of training episode `k`.
    fn episode_spec(&mut self, k: u64) -> Result<EpisodeSpec> {
        let master = self.config.master_seed;
        let seed = match self.config.seed_mode() {
            SeedMode::Fixed(s) => s,
            SeedMode::PerEpisode => derive_seed(master, tag::SCENARIO, k),
        };
        let difficulty = self.difficulty();
        let reuse = self
            .scenario
            .as_ref()
            .is_some_and(|s| s.config.seed == seed && s.config.difficulty == difficulty);
        if !reuse {
            let sc = Scenario::generate(ScenarioConfig::new(seed, difficulty)?)?;
            self.scenario = Some(Arc::new(sc));
        }
        Ok(EpisodeSpec {
            episode: k,
            scenario: self.scenario.clone().expect("scenario generated above"),
            env: self.config.env_config(),
            fire_seed: derive_seed(master, tag::FIRE, k),
            policy_seed: 0,
        })
    }

    /// Trains until `total_steps` agent-steps have been collected.
    pub fn run(&mut self, observer: &mut dyn TrainObserver) -> Result<TrainReport> {
        let total = self.config.total_steps;
        let freq = self.config.summary_freq;
        let horizon = self.config.ppo.time_horizon;
        let layout = self.config.setup.layout();
        let width = layout.observation_size();
        let mut buffer = RolloutBuffer::new(width, layout.branches().len());
        let mut cache = ForwardCache::default();
        let mut obs = Vec::new();
        let mut next_summary = (self.steps / freq + 1) * freq;
        let mut report = TrainReport {
            steps: self.steps,
            episodes: self.episodes,
            updates: self.learner.updates,
            summaries: 0,
            lesson_changes: Vec::new(),
        };

        'episodes: while self.steps < total {
            let spec = self.episode_spec(self.episodes)?;
            self.episodes += 1;
            let mut env = Environment::new(spec.scenario.clone(), spec.env, spec.fire_seed);
            let mut observer_state = Observer::new(layout, env.tower_count());
            let agents = match layout {
                ActionLayout::MultiAgent => env.tower_count(),
                ActionLayout::SingleAgent => 1,
            };
            let mut trajs = vec![Trajectory::default(); agents];
            let mut acc = EpisodeAccumulator::new(env.tower_count());
            env.begin_step()?;
            observer_state.observe(&env, &mut obs);
            loop {
                let samples = self
                    .learner
                    .act(&obs, agents, &mut self.policy_rng, &mut cache)?;
                let picks: Vec<Vec<usize>> = samples.iter().map(|s| s.actions.clone()).collect();
                let actions = decode_actions(layout, &picks)?;
                let outcome = env.finish_step(&actions)?;
                acc.add(&outcome, &env);
                for (i, (traj, s)) in trajs.iter_mut().zip(&samples).enumerate() {
                    let reward = match layout {
                        ActionLayout::MultiAgent => outcome.reward.total[i],
                        ActionLayout::SingleAgent => {
                            let n = outcome.reward.egoistic.len() as f64;
                            outcome.reward.egoistic.iter().sum::<f64>() / n + outcome.reward.collective
                        }
                    };
                    traj.push(&obs[i * width..(i + 1) * width], s, reward, false);
                }
                self.steps += agents as u64;
                let stop = self.steps >= total;

                // the following observation; after the last step this is
                // the terminal observation that truncated segments
                // bootstrap from
                env.begin_step()?;
                observer_state.observe(&env, &mut obs);
                for (i, traj) in trajs.iter_mut().enumerate() {
                    traj.push_next_obs(&obs[i * width..(i + 1) * width]);
                }
                if outcome.done || stop || trajs[0].len() >= horizon {
                    let boot = self.learner.values(&obs, agents, &mut cache)?;
                    for (traj, v) in trajs.iter_mut().zip(boot) {
                        self.learner.finish_trajectory(traj, v, &mut buffer)?;
                        traj.clear();
                    }
                }
                if buffer.len() >= self.config.ppo.buffer_size {
                    let lr = linear_lr(self.config.ppo.learning_rate, self.steps, total);
                    let shuffle_seed = derive_seed(self.config.master_seed, tag::SHUFFLE, 0);
                    self.last_update = self.learner.update(&buffer, lr, shuffle_seed)?;
                    let n = buffer.len() as f64;
                    self.last_mean_intrinsic = buffer.intrinsic.iter().sum::<f64>() / n;
                    buffer.clear();
                    report.updates = self.learner.updates;
                    observer.on_update(self.steps, &self.last_update)?;
                }
                if outcome.done {
                    let metrics = core::mem::replace(&mut acc, EpisodeAccumulator::new(0)).finish(&spec, &env);
                    observer.on_episode(&metrics)?;
                    if let Some(c) = &mut self.curriculum {
                        if let Some(t) = c.update(metrics.reward) {
                            let change = LessonChange {
                                step: self.steps,
                                episode: metrics.episode,
                                from: t.from + 1,
                                to: t.to + 1,
                                smoothed_reward: t.smoothed_reward,
                            };
                            observer.on_lesson(&change)?;
                            report.lesson_changes.push(change);
                        }
                    }
                    self.window.push(metrics);
                }
                while next_summary <= total && self.steps >= next_summary {
                    let row = self.summary_row(next_summary);
                    observer.on_summary(&row, self)?;
                    report.summaries += 1;
                    next_summary += freq;
                }
                if stop {
                    break 'episodes;
                }
                if outcome.done {
                    break;
                }
            }
        }
        report.steps = self.steps;
        report.episodes = self.episodes;
        report.updates = self.learner.updates;
        Ok(report)
    }

    fn summary_row(&mut self, step: u64) -> SummaryRow {
        let rewards: Vec<f64> = self.window.iter().map(|m| m.reward).collect();
        let perf: Vec<f64> = self.window.iter().map(|m| m.mean_performance).collect();
        let stats = MeanStd::of(&rewards);
        let mean_reward = if rewards.is_empty() { self.last_mean } else { stats.mean };
        self.last_mean = mean_reward;
        let row = SummaryRow {
            step,
            episodes: self.episodes,
            updates: self.learner.updates,
            lesson: self.curriculum.as_ref().map_or(0, |c| c.state.lesson + 1),
            difficulty: self.difficulty(),
            window_episodes: rewards.len(),
            mean_reward,
            std_reward: stats.std,
            mean_performance: MeanStd::of(&perf).mean,
            policy_loss: self.last_update.policy_loss,
            value_loss: self.last_update.value_loss,
            entropy: self.last_update.entropy,
            learning_rate: linear_lr(self.config.ppo.learning_rate, step, self.config.total_steps),
            mean_intrinsic: self.last_mean_intrinsic,
        };
        self.window.clear();
        row
    }
}

impl core::fmt::Display for LessonChange {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "step {} episode {}: lesson {} -> {} (smoothed reward {:.3})",
            self.step, self.episode, self.from, self.to, self.smoothed_reward
        )
    }
}
