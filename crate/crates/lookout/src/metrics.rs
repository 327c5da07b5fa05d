//! CSV logs. Every file starts with a header row; floats use the shortest
//! representation that round-trips, so identical runs give identical bytes.
//!
//! `episodes.csv`, one row per finished episode:
//!
//! | column | meaning |
//! |---|---|
//! | `episode` | zero-based episode index |
//! | `scenario_seed`, `fire_seed`, `difficulty` | what the episode ran on |
//! | `steps` | environment steps (always the episode length) |
//! | `reward` | cumulative reward, averaged over towers |
//! | `mean_performance` | egoistic reward per tower and step |
//! | `mean_collective_performance` | collective reward per step |
//! | `fire_count` | trees that caught fire |
//! | `help_count` | responses that earned the help bonus |
//! | `help_request_count`, `response_count` | help traffic |
//! | `mean_resource` | support per tower, averaged over steps |
//! | `return_<i>` | cumulative reward of tower `i` |
//! | `performance_<i>` | mean performance of tower `i` |
//!
//! `summary.csv` has the columns of [`SUMMARY_HEADER`], one row every
//! `summary_freq` agent-steps, and `lessons.csv` those of
//! [`LESSON_HEADER`] (lessons are one-based).
//!
//! `steps.csv`, written by `replay`, one row per step: `episode`, `t`,
//! `burning`, `burned`, `frontier` (burning tree positions as `x:z` pairs
//! separated by `;`), then per tower `reserve_<i>`, `support_<i>`,
//! `performance_<i>`, `egoistic_<i>`, `bonus_<i>`, `total_<i>`,
//! `action_<i>`, `accepted_<i>`, and finally `collective`.
//!
//! `comms.csv`, written by `replay`: `episode`, `t`, `kind` (`request` or
//! `response`), `id`, `sender`, `sent_at`, `receivers` (`;`-separated),
//! `responder`, `bonus`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Result;
use lookout_core::env::{CommsEvent, Environment, StepOutcome, TowerAction};
use lookout_core::harness::EpisodeMetrics;

pub type CsvWriter = csv::Writer<BufWriter<File>>;

pub fn create(path: &Path) -> Result<CsvWriter> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn per_tower(names: &[&str], towers: usize) -> Vec<String> {
    names
        .iter()
        .flat_map(|n| (0..towers).map(move |i| format!("{n}_{i}")))
        .collect()
}

pub fn episode_header(towers: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "episode",
        "scenario_seed",
        "fire_seed",
        "difficulty",
        "steps",
        "reward",
        "mean_performance",
        "mean_collective_performance",
        "fire_count",
        "help_count",
        "help_request_count",
        "response_count",
        "mean_resource",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(per_tower(&["return", "performance"], towers));
    h
}

fn f(v: f64) -> String {
    v.to_string()
}

pub fn episode_record(m: &EpisodeMetrics) -> Vec<String> {
    let mut r = vec![
        m.episode.to_string(),
        m.scenario_seed.to_string(),
        m.fire_seed.to_string(),
        m.difficulty.to_string(),
        m.steps.to_string(),
        f(m.reward),
        f(m.mean_performance),
        f(m.mean_collective_performance),
        m.fire_count.to_string(),
        m.help_count.to_string(),
        m.help_request_count.to_string(),
        m.response_count.to_string(),
        f(m.mean_resource),
    ];
    r.extend(m.agent_returns.iter().map(|&v| f(v)));
    r.extend(m.tower_performance.iter().map(|&v| f(v)));
    r
}

pub const SUMMARY_HEADER: &[&str] = &[
    "step",
    "episodes",
    "updates",
    "lesson",
    "difficulty",
    "window_episodes",
    "mean_reward",
    "std_reward",
    "mean_performance",
    "policy_loss",
    "value_loss",
    "entropy",
    "learning_rate",
    "mean_intrinsic",
];

pub const LESSON_HEADER: &[&str] = &["step", "episode", "from", "to", "smoothed_reward"];

fn action_name(a: TowerAction) -> &'static str {
    match a {
        TowerAction::NoOp => "no_op",
        TowerAction::SupportSelf => "support_self",
        TowerAction::SupportRequester => "support_requester",
        TowerAction::Reclaim => "reclaim",
        TowerAction::SendHelpRequest => "send_help_request",
        TowerAction::SupportFireNeighbor => "support_fire_neighbor",
    }
}

pub fn step_header(towers: usize) -> Vec<String> {
    let mut h: Vec<String> = ["episode", "t", "burning", "burned", "frontier"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(per_tower(
        &[
            "reserve",
            "support",
            "performance",
            "egoistic",
            "bonus",
            "total",
            "action",
            "accepted",
        ],
        towers,
    ));
    h.push("collective".into());
    h
}

/// Per-step fire, ledger, reward and action trace plus the comms log.
pub struct TraceLog {
    steps: CsvWriter,
    comms: CsvWriter,
    header: bool,
}

impl TraceLog {
    pub fn create(steps: &Path, comms: &Path) -> Result<Self> {
        let mut c = create(comms)?;
        c.write_record([
            "episode",
            "t",
            "kind",
            "id",
            "sender",
            "sent_at",
            "receivers",
            "responder",
            "bonus",
        ])?;
        Ok(Self {
            steps: create(steps)?,
            comms: c,
            header: false,
        })
    }

    /// Records the step just finished; `env` is the state after it.
    pub fn write(&mut self, episode: u64, env: &Environment, out: &StepOutcome) -> Result<()> {
        let n = env.tower_count();
        if !self.header {
            self.steps.write_record(step_header(n))?;
            self.header = true;
        }
        let fire = env.fire();
        let trees = &env.scenario().forest.trees;
        let frontier: Vec<String> = fire
            .burning()
            .iter()
            .map(|&i| {
                let p = trees[i as usize].position;
                format!("{:.1}:{:.1}", p[0], p[2])
            })
            .collect();
        let mut r = vec![
            episode.to_string(),
            out.t.to_string(),
            fire.burning_count().to_string(),
            fire.burned_count().to_string(),
            frontier.join(";"),
        ];
        let ledger = env.ledger();
        r.extend((0..n).map(|i| f(ledger.reserve(i))));
        r.extend((0..n).map(|i| f(ledger.support(i))));
        r.extend(out.performance.iter().map(|&v| f(v)));
        r.extend(out.reward.egoistic.iter().map(|&v| f(v)));
        r.extend(out.reward.bonus.iter().map(|&v| f(v)));
        r.extend(out.reward.total.iter().map(|&v| f(v)));
        r.extend(out.actions.iter().map(|a| action_name(a.action).to_string()));
        r.extend(out.actions.iter().map(|a| a.accepted().to_string()));
        r.push(f(out.reward.collective));
        self.steps.write_record(&r)?;

        for e in &out.comms {
            let rec = match e {
                CommsEvent::Request {
                    id,
                    sender,
                    sent_at,
                    receivers,
                } => [
                    episode.to_string(),
                    out.t.to_string(),
                    "request".into(),
                    id.to_string(),
                    sender.to_string(),
                    sent_at.to_string(),
                    receivers.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(";"),
                    String::new(),
                    String::new(),
                ],
                CommsEvent::Response {
                    id,
                    sender,
                    sent_at,
                    responder,
                    at,
                    bonus,
                } => [
                    episode.to_string(),
                    at.to_string(),
                    "response".into(),
                    id.to_string(),
                    sender.to_string(),
                    sent_at.to_string(),
                    String::new(),
                    responder.to_string(),
                    bonus.to_string(),
                ],
            };
            self.comms.write_record(&rec)?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.steps.flush()?;
        self.comms.flush()?;
        Ok(())
    }
}
