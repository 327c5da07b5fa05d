//! The work behind each subcommand, usable without the CLI.

use std::fs::{self, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lookout_core::env::{EnvConfig, Environment, Scenario, StepOutcome};
use lookout_core::harness::{
    evaluate, run_episode, Controller, EpisodeMetrics, EpisodeSpec, EvalReport, EvalSpec, ExperimentConfig,
    GreedyController, LessonChange, PolicyController, SeedMode, Setup, SummaryRow, TrainObserver, TrainReport,
    Trainer,
};
use lookout_core::learner::{Learner, UpdateStats};
use lookout_core::rng::{derive_seed, tag};
use lookout_core::scenario::ScenarioConfig;
use lookout_core::towers::TOWER_COUNT;
use serde::Serialize;

use crate::checkpoint::{Checkpoint, CheckpointDir};
use crate::config;
use crate::manifest::Manifest;
use crate::metrics::{self, episode_header, episode_record, CsvWriter, TraceLog};
use crate::scenario_file::ScenarioPin;

pub const EPISODES_CSV: &str = "episodes.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const LESSONS_CSV: &str = "lessons.csv";
pub const STEPS_CSV: &str = "steps.csv";
pub const COMMS_CSV: &str = "comms.csv";
pub const EVAL_CSV: &str = "eval_episodes.csv";
pub const EVAL_JSON: &str = "eval.json";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const CONFIG_TOML: &str = "config.toml";
pub const SCENARIO_TOML: &str = "scenario.toml";
pub const TIMING_JSON: &str = "timing.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

fn scenario_for(seed: u64, difficulty: u8) -> Result<Scenario> {
    Ok(Scenario::generate(ScenarioConfig::new(seed, difficulty)?)?)
}

fn open_csv(path: &Path, append: bool) -> Result<(CsvWriter, bool)> {
    let fresh = !append || fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(!fresh)
        .truncate(fresh)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file));
    Ok((w, fresh))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes the training logs and checkpoints as the trainer reports.
struct RunLogger {
    episodes: CsvWriter,
    episode_header: bool,
    summary: CsvWriter,
    lessons: CsvWriter,
    checkpoints: CheckpointDir,
    last_checkpoint: Option<PathBuf>,
    quiet: bool,
}

fn observer_err(e: impl std::fmt::Display) -> lookout_core::Error {
    lookout_core::Error::Observer(e.to_string())
}

impl RunLogger {
    fn flush(&mut self) -> Result<()> {
        self.episodes.flush()?;
        self.summary.flush()?;
        self.lessons.flush()?;
        Ok(())
    }
}

impl TrainObserver for RunLogger {
    fn on_episode(&mut self, m: &EpisodeMetrics) -> lookout_core::Result<()> {
        if !self.episode_header {
            self.episodes
                .write_record(episode_header(m.agent_returns.len()))
                .map_err(observer_err)?;
            self.episode_header = true;
        }
        self.episodes.write_record(episode_record(m)).map_err(observer_err)
    }

    fn on_update(&mut self, _step: u64, _stats: &UpdateStats) -> lookout_core::Result<()> {
        Ok(())
    }

    fn on_lesson(&mut self, c: &LessonChange) -> lookout_core::Result<()> {
        if !self.quiet {
            eprintln!("{c}");
        }
        self.lessons.serialize(c).map_err(observer_err)?;
        self.lessons.flush().map_err(observer_err)
    }

    fn on_summary(&mut self, row: &SummaryRow, trainer: &Trainer) -> lookout_core::Result<()> {
        if !self.quiet {
            eprintln!(
                "step {:>10}  episodes {:>6}  reward {:>10.3} ± {:<9.3} policy loss {:>9.4}  value loss {:>9.4}",
                row.step, row.episodes, row.mean_reward, row.std_reward, row.policy_loss, row.value_loss
            );
        }
        self.summary.serialize(row).map_err(observer_err)?;
        self.flush().map_err(observer_err)?;
        let path = self
            .checkpoints
            .save(&Checkpoint::from_trainer(trainer))
            .map_err(observer_err)?;
        self.last_checkpoint = Some(path);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub out_dir: PathBuf,
    pub last_checkpoint: Option<PathBuf>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainOptions {
    /// Continue from this checkpoint; logs in the output directory are
    /// appended to.
    pub resume: Option<PathBuf>,
    /// Suppress progress lines on stderr.
    pub quiet: bool,
}

/// Trains `config` into `out`. On a training error the logs are flushed,
/// the checkpoints already written are kept and the error is returned.
pub fn train(config: &ExperimentConfig, out: &Path, opts: &TrainOptions) -> Result<TrainOutcome> {
    let started = Instant::now();
    let mut trainer = match &opts.resume {
        Some(p) => {
            let ckpt = Checkpoint::read(p).with_context(|| format!("reading {}", p.display()))?;
            if ckpt.config.setup != config.setup {
                bail!(
                    "checkpoint was trained as {} but the config says {}",
                    ckpt.config.setup,
                    config.setup
                );
            }
            let mut t = ckpt.into_trainer()?;
            t.config.total_steps = config.total_steps;
            t
        }
        None => Trainer::new(config.clone())?,
    };
    let config = trainer.config.clone();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let config_toml = config::to_toml_string(&config)?;
    fs::write(out.join(CONFIG_TOML), &config_toml)?;
    let scenario = scenario_for(config.evaluation_seed(), config.evaluation_difficulty())?;
    let pin = ScenarioPin::of(&scenario);
    if let SeedMode::Fixed(_) = config.seed_mode() {
        pin.write(&out.join(SCENARIO_TOML))?;
    }
    let mut manifest = Manifest::new("train", &config, &config_toml, pin, &scenario.graph)?;
    manifest.write(&out.join(MANIFEST_JSON))?;

    let append = opts.resume.is_some();
    let (episodes, fresh_episodes) = open_csv(&out.join(EPISODES_CSV), append)?;
    let (mut summary, fresh) = open_csv(&out.join(SUMMARY_CSV), append)?;
    if fresh {
        summary.write_record(metrics::SUMMARY_HEADER)?;
    }
    let (mut lessons, fresh) = open_csv(&out.join(LESSONS_CSV), append)?;
    if fresh {
        lessons.write_record(metrics::LESSON_HEADER)?;
    }
    let mut logger = RunLogger {
        episodes,
        episode_header: !fresh_episodes,
        summary,
        lessons,
        checkpoints: CheckpointDir::new(out.join(CHECKPOINT_DIR), config.keep_checkpoints)?,
        last_checkpoint: None,
        quiet: opts.quiet,
    };

    let result = trainer.run(&mut logger);
    logger.flush()?;
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            let kept = logger.checkpoints.latest()?;
            let note = match kept {
                Some(p) => format!("last good checkpoint: {}", p.display()),
                None => "no checkpoint was written".into(),
            };
            return Err(anyhow::Error::new(e).context(format!("training aborted at step {} ({note})", trainer.steps)));
        }
    };
    let ckpt = Checkpoint::from_trainer(&trainer);
    let final_path = logger.checkpoints.path_for(ckpt.steps);
    if logger.last_checkpoint.as_ref() != Some(&final_path) {
        logger.last_checkpoint = Some(logger.checkpoints.save(&ckpt)?);
    }
    manifest.hash_files(out, &[CONFIG_TOML, EPISODES_CSV, SUMMARY_CSV, LESSONS_CSV, SCENARIO_TOML])?;
    manifest.write(&out.join(MANIFEST_JSON))?;
    let seconds = started.elapsed().as_secs_f64();
    write_json(
        &out.join(TIMING_JSON),
        &serde_json::json!({ "wall_clock_seconds": seconds, "steps": report.steps }),
    )?;
    Ok(TrainOutcome {
        report,
        out_dir: out.to_path_buf(),
        last_checkpoint: logger.last_checkpoint,
        seconds,
    })
}

/// A policy to evaluate or replay.
#[derive(Debug, Clone)]
pub enum Policy {
    Greedy,
    Learned { setup: Setup, learner: Box<Learner> },
}

impl Policy {
    pub fn from_checkpoint(path: &Path) -> Result<(Self, Checkpoint)> {
        let ckpt = Checkpoint::read(path).with_context(|| format!("reading {}", path.display()))?;
        let policy = Policy::Learned {
            setup: ckpt.config.setup,
            learner: Box::new(ckpt.learner.clone()),
        };
        Ok((policy, ckpt))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Greedy => Setup::Greedy.name(),
            Policy::Learned { setup, .. } => setup.name(),
        }
    }

    fn with_controller<R>(&self, f: impl FnOnce(&mut dyn Controller) -> Result<R>) -> Result<R> {
        match self {
            Policy::Greedy => f(&mut GreedyController),
            Policy::Learned { setup, learner } => f(&mut PolicyController::new(learner, setup.layout(), TOWER_COUNT)),
        }
    }
}

/// Where and how long to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPlan {
    /// Scenario seed of the fixed-seed column.
    pub seed: u64,
    pub difficulty: u8,
    pub episodes: usize,
    pub master_seed: u64,
    pub env: EnvConfig,
}

impl EvalPlan {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self {
            seed: config.evaluation_seed(),
            difficulty: config.evaluation_difficulty(),
            episodes: config.eval_episodes,
            master_seed: config.master_seed,
            env: config.env_config(),
        }
    }
}

/// Fixed-seed and held-out random-seed evaluation.
pub fn evaluate_policy(policy: &Policy, plan: &EvalPlan) -> Result<EvalReport> {
    let fixed = EvalSpec {
        seed: SeedMode::Fixed(plan.seed),
        difficulty: plan.difficulty,
        episodes: plan.episodes,
        master_seed: plan.master_seed,
        env: plan.env,
    };
    let random = EvalSpec {
        seed: SeedMode::PerEpisode,
        ..fixed
    };
    policy.with_controller(|c| {
        Ok(EvalReport {
            fixed_seed: plan.seed,
            fixed: evaluate(c, &fixed)?,
            random: evaluate(c, &random)?,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub policy: String,
    pub seed: String,
    pub difficulty: u8,
    pub episodes: usize,
    pub fixed_reward_mean: f64,
    pub fixed_reward_std: f64,
    pub fixed_performance_mean: f64,
    pub fixed_performance_std: f64,
    pub random_reward_mean: f64,
    pub random_reward_std: f64,
    pub random_performance_mean: f64,
    pub random_performance_std: f64,
}

impl EvalSummary {
    pub fn new(policy: &Policy, plan: &EvalPlan, r: &EvalReport) -> Self {
        Self {
            policy: policy.name().into(),
            seed: plan.seed.to_string(),
            difficulty: plan.difficulty,
            episodes: plan.episodes,
            fixed_reward_mean: r.fixed.reward.mean,
            fixed_reward_std: r.fixed.reward.std,
            fixed_performance_mean: r.fixed.performance.mean,
            fixed_performance_std: r.fixed.performance.std,
            random_reward_mean: r.random.reward.mean,
            random_reward_std: r.random.reward.std,
            random_performance_mean: r.random.performance.mean,
            random_performance_std: r.random.performance.std,
        }
    }
}

/// Writes `eval.json` and `eval_episodes.csv` (the episode columns plus a
/// leading `column` of `fixed` or `random`).
pub fn write_eval(out: &Path, summary: &EvalSummary, report: &EvalReport) -> Result<()> {
    fs::create_dir_all(out)?;
    write_json(&out.join(EVAL_JSON), summary)?;
    let mut w = metrics::create(&out.join(EVAL_CSV))?;
    let mut header = vec!["column".to_string()];
    header.extend(episode_header(TOWER_COUNT));
    w.write_record(&header)?;
    for (name, stats) in [("fixed", &report.fixed), ("random", &report.random)] {
        for m in &stats.episodes {
            let mut r = vec![name.to_string()];
            r.extend(episode_record(m));
            w.write_record(&r)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Which episode to replay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayPlan {
    pub seed: u64,
    pub difficulty: u8,
    /// Fire and policy seeds are those of training episode `episode`.
    pub episode: u64,
    pub master_seed: u64,
    pub env: EnvConfig,
}

/// Runs one episode and writes `steps.csv` and `comms.csv` to `out`.
pub fn replay(policy: &Policy, plan: &ReplayPlan, out: &Path) -> Result<EpisodeMetrics> {
    fs::create_dir_all(out)?;
    let spec = EpisodeSpec {
        episode: plan.episode,
        scenario: Arc::new(scenario_for(plan.seed, plan.difficulty)?),
        env: plan.env,
        fire_seed: derive_seed(plan.master_seed, tag::FIRE, plan.episode),
        policy_seed: derive_seed(plan.master_seed, tag::POLICY, plan.episode),
    };
    let mut trace = TraceLog::create(&out.join(STEPS_CSV), &out.join(COMMS_CSV))?;
    let mut io_error = None;
    let m = policy.with_controller(|c| {
        let mut hook = |env: &Environment, o: &StepOutcome| {
            trace.write(plan.episode, env, o).map_err(|e| {
                let msg = e.to_string();
                io_error = Some(e);
                observer_err(msg)
            })
        };
        Ok(run_episode(&spec, c, Some(&mut hook))?)
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    let m = m?;
    trace.flush()?;
    Ok(m)
}
