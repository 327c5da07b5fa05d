//! Command-line interface.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lookout_core::harness::{DifficultyMode, ExperimentConfig, SeedMode, Setup};

use crate::config::{self, Overrides};
use crate::run::{self, EvalPlan, EvalSummary, Policy, ReplayPlan, TrainOptions};
use crate::scenario_file::ScenarioPin;

#[derive(Debug, Parser)]
#[command(name = "lookout", version, about = "Wildfire lookout-tower simulator and multi-agent PPO trainer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy; writes logs, checkpoints and a manifest.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Evaluate a checkpoint or the greedy baseline on fixed and held-out seeds.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to evaluate; without one the setup must be greedy.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Scenario file pinning the fixed-seed column.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Run one episode and write per-step and communication traces.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Use the fire and policy seeds of this training episode.
        #[arg(long, default_value_t = 0)]
        episode: u64,
    },
    /// Draw SVG charts from a training run directory.
    Plot {
        /// Run directory holding summary.csv and episodes.csv.
        run_dir: PathBuf,
        /// Output directory (defaults to the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML file mirroring the experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// greedy, single_agent, multi_agent or multi_agent_ac.
    #[arg(long, value_parser = parse_setup)]
    pub setup: Option<Setup>,
    /// Scenario seed, or "inf" for a fresh seed every episode.
    #[arg(long, value_parser = parse_seed)]
    pub seed: Option<SeedMode>,
    /// Difficulty 1-10, or "curriculum".
    #[arg(long, value_parser = parse_difficulty)]
    pub difficulty: Option<DifficultyMode>,
    #[arg(long)]
    pub total_steps: Option<u64>,
    /// Evaluation episodes.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub master_seed: Option<u64>,
}

fn parse_setup(s: &str) -> Result<Setup, String> {
    Setup::parse(s).ok_or_else(|| format!("unknown setup {s:?}"))
}

fn parse_seed(s: &str) -> Result<SeedMode, String> {
    SeedMode::parse(s).ok_or_else(|| format!("expected an integer or \"inf\", got {s:?}"))
}

fn parse_difficulty(s: &str) -> Result<DifficultyMode, String> {
    match DifficultyMode::parse(s) {
        Some(DifficultyMode::Fixed(d)) if !(1..=10).contains(&d) => Err(format!("difficulty {d} is outside 1-10")),
        Some(d) => Ok(d),
        None => Err(format!("expected 1-10 or \"curriculum\", got {s:?}")),
    }
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            setup: self.setup,
            seed: self.seed,
            difficulty: self.difficulty,
            total_steps: self.total_steps,
            episodes: self.episodes,
            out: self.out.clone(),
            master_seed: self.master_seed,
        }
    }

    fn resolve(&self) -> Result<ExperimentConfig> {
        config::resolve(self.config.as_deref(), &self.overrides())
    }
}

/// Loads the policy and the config it runs under. A checkpoint supplies
/// the config; command-line flags still override it.
fn policy_and_config(common: &Common, checkpoint: Option<&Path>) -> Result<(Policy, ExperimentConfig)> {
    match checkpoint {
        Some(p) => {
            let (policy, ckpt) = Policy::from_checkpoint(p)?;
            let text = config::to_toml_string(&ckpt.config)?;
            let mut o = common.overrides();
            o.setup = None;
            let config = config::from_toml_str(&text, &o)?;
            Ok((policy, config))
        }
        None => {
            let config = common.resolve()?;
            if config.setup != Setup::Greedy {
                bail!("{} needs a --checkpoint", config.setup);
            }
            Ok((Policy::Greedy, config))
        }
    }
}

/// Fixed-column scenario: the pin file, then --seed/--difficulty, then the
/// config's evaluation defaults.
fn fixed_scenario(common: &Common, config: &ExperimentConfig, pin: Option<&Path>) -> Result<(u64, u8)> {
    if let Some(p) = pin {
        let pin = ScenarioPin::read(p).with_context(|| format!("reading {}", p.display()))?;
        pin.generate()?;
        return Ok((pin.seed, pin.difficulty));
    }
    let seed = match common.seed {
        Some(SeedMode::Fixed(s)) => s,
        _ => config.evaluation_seed(),
    };
    let difficulty = match common.difficulty {
        Some(DifficultyMode::Fixed(d)) => d,
        _ => config.evaluation_difficulty(),
    };
    Ok((seed, difficulty))
}

fn out_dir(common: &Common, config: &ExperimentConfig, leaf: &str) -> PathBuf {
    match &common.out {
        Some(o) => PathBuf::from(o),
        None => Path::new(&config.out_dir).join(leaf),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, resume, quiet } => {
            let config = common.resolve()?;
            let out = out_dir(&common, &config, config.setup.name());
            let o = run::train(&config, &out, &TrainOptions { resume, quiet })?;
            println!(
                "trained {} agent-steps over {} episodes ({} updates) in {:.1} s",
                o.report.steps, o.report.episodes, o.report.updates, o.seconds
            );
            if let Some(p) = o.last_checkpoint {
                println!("checkpoint: {}", p.display());
            }
            println!("logs: {}", o.out_dir.display());
        }
        Command::Eval {
            common,
            checkpoint,
            scenario,
        } => {
            let (policy, config) = policy_and_config(&common, checkpoint.as_deref())?;
            let (seed, difficulty) = fixed_scenario(&common, &config, scenario.as_deref())?;
            let plan = EvalPlan {
                seed,
                difficulty,
                ..EvalPlan::from_config(&config)
            };
            let report = run::evaluate_policy(&policy, &plan)?;
            let summary = EvalSummary::new(&policy, &plan, &report);
            let out = out_dir(&common, &config, "eval");
            run::write_eval(&out, &summary, &report)?;
            println!(
                "{}  seed {} difficulty {}  {} episodes",
                summary.policy, summary.seed, summary.difficulty, summary.episodes
            );
            println!(
                "  fixed seed:   reward {:.2} ± {:.2}   performance {:.4} ± {:.4}",
                summary.fixed_reward_mean,
                summary.fixed_reward_std,
                summary.fixed_performance_mean,
                summary.fixed_performance_std
            );
            println!(
                "  random seeds: reward {:.2} ± {:.2}   performance {:.4} ± {:.4}",
                summary.random_reward_mean,
                summary.random_reward_std,
                summary.random_performance_mean,
                summary.random_performance_std
            );
        }
        Command::Replay {
            common,
            checkpoint,
            scenario,
            episode,
        } => {
            let (policy, config) = policy_and_config(&common, checkpoint.as_deref())?;
            let (seed, difficulty) = fixed_scenario(&common, &config, scenario.as_deref())?;
            let plan = ReplayPlan {
                seed,
                difficulty,
                episode,
                master_seed: config.master_seed,
                env: config.env_config(),
            };
            let out = out_dir(&common, &config, "replay");
            let m = run::replay(&policy, &plan, &out)?;
            println!(
                "episode {episode}: reward {:.3}, {} trees burned, {} help requests; traces in {}",
                m.reward,
                m.fire_count,
                m.help_request_count,
                out.display()
            );
        }
        Command::Plot { run_dir, out } => {
            let out = out.unwrap_or_else(|| run_dir.clone());
            for p in crate::plot::plot_run(&run_dir, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
