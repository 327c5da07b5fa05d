//! Observation and action encodings for the learning setups, and the greedy
//! baseline.
//!
//! Multi-agent frame (32 values per tower):
//!
//! | range    | content                                            |
//! |----------|----------------------------------------------------|
//! | `0..7`   | own reading: fire x, y, z, temp, hum, prep, oc     |
//! | `7..28`  | three neighbour broadcasts, same 7-value layout    |
//! | `28..31` | help inbox slot occupied (oldest first)            |
//! | `31`     | own reserve                                        |
//!
//! The single-agent frame is the nine own readings back to back (63 values).
//! Both are stacked with the previous frame (zeros at `t = 0`).
//!
//! Normalisation: a fire coordinate maps to `0.1 + 0.9 * coord / scale`
//! (x and z over the world extent, y over [`ELEVATION_SCALE`]) and all three
//! are 0 when no fire is seen, so the validity bit is folded into the
//! position. Temperature maps `[10, 40]` onto `[0, 1]`, support `p` to
//! `p / (1 + p)`; humidity, overcast and reserve are already in `[0, 1]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::env::{Environment, TowerAction};
use crate::resources::ResourceLedger;
use crate::towers::LocalObservation;
use crate::weather::{TEMPERATURE_MAX, TEMPERATURE_MIN};
use crate::{Error, Result};

pub const MESSAGE_WIDTH: usize = 7;
pub const MESSAGES: usize = 3;
pub const FRAME_MA: usize = 32;
pub const FRAME_SA: usize = 63;
pub const STACK: usize = 2;
pub const OBS_MA: usize = FRAME_MA * STACK;
pub const OBS_SA: usize = FRAME_SA * STACK;
/// Height used to normalise fire elevation; the tallest terrain is 200 m.
pub const ELEVATION_SCALE: f64 = 200.0;

/// Multi-agent action table, indexed by the policy output.
pub const MA_ACTIONS: [TowerAction; 5] = [
    TowerAction::NoOp,
    TowerAction::SupportSelf,
    TowerAction::SupportRequester,
    TowerAction::Reclaim,
    TowerAction::SendHelpRequest,
];

/// Per-tower sub-actions of the single-agent controller.
pub const SA_SUB_ACTIONS: [TowerAction; 4] = [
    TowerAction::NoOp,
    TowerAction::SupportSelf,
    TowerAction::SupportFireNeighbor,
    TowerAction::Reclaim,
];

/// Which controller drives the towers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionLayout {
    /// One five-way choice per tower, shared weights across towers.
    MultiAgent,
    /// One agent with nine four-way branches.
    SingleAgent,
}

impl ActionLayout {
    /// Sizes of the independent categorical branches.
    pub fn branches(self) -> Vec<usize> {
        match self {
            Self::MultiAgent => vec![MA_ACTIONS.len()],
            Self::SingleAgent => vec![SA_SUB_ACTIONS.len(); crate::towers::TOWER_COUNT],
        }
    }

    pub fn observation_size(self) -> usize {
        match self {
            Self::MultiAgent => OBS_MA,
            Self::SingleAgent => OBS_SA,
        }
    }

    pub fn frame_size(self) -> usize {
        match self {
            Self::MultiAgent => FRAME_MA,
            Self::SingleAgent => FRAME_SA,
        }
    }
}

pub fn decode_ma(index: usize) -> Result<TowerAction> {
    MA_ACTIONS.get(index).copied().ok_or(Error::DimensionMismatch {
        what: "multi-agent action index",
        expected: MA_ACTIONS.len(),
        found: index,
    })
}

/// One sub-action index per tower.
pub fn decode_sa(indices: &[usize]) -> Result<Vec<TowerAction>> {
    indices
        .iter()
        .map(|&i| {
            SA_SUB_ACTIONS.get(i).copied().ok_or(Error::DimensionMismatch {
                what: "single-agent sub-action index",
                expected: SA_SUB_ACTIONS.len(),
                found: i,
            })
        })
        .collect()
}

/// Normalised 7-value form of a reading.
pub fn encode_local(obs: &LocalObservation, world_extent: f64) -> [f32; MESSAGE_WIDTH] {
    let (x, y, z) = match obs.cof_pos {
        Some([x, y, z]) => (
            0.1 + 0.9 * (x / world_extent).clamp(0.0, 1.0),
            0.1 + 0.9 * (y / ELEVATION_SCALE).clamp(0.0, 1.0),
            0.1 + 0.9 * (z / world_extent).clamp(0.0, 1.0),
        ),
        None => (0.0, 0.0, 0.0),
    };
    let temp = ((obs.temp - TEMPERATURE_MIN) / (TEMPERATURE_MAX - TEMPERATURE_MIN)).clamp(0.0, 1.0);
    let prep = obs.prep.max(0.0);
    [
        x as f32,
        y as f32,
        z as f32,
        temp as f32,
        obs.hum.clamp(0.0, 1.0) as f32,
        (prep / (1.0 + prep)) as f32,
        obs.oc.clamp(0.0, 1.0) as f32,
    ]
}

/// Multi-agent frame for `tower`, read after the observe phase.
pub fn encode_frame_ma(env: &Environment, tower: usize, out: &mut [f32]) {
    let extent = env.scenario().config.world_extent;
    out[..MESSAGE_WIDTH].copy_from_slice(&encode_local(&env.observations()[tower], extent));
    let inbox = env.inboxes().broadcasts(tower);
    for slot in 0..MESSAGES {
        let dst = &mut out[MESSAGE_WIDTH * (1 + slot)..MESSAGE_WIDTH * (2 + slot)];
        match inbox.get(slot).copied().flatten() {
            Some(m) => dst.copy_from_slice(&encode_local(&m.observation, extent)),
            None => dst.fill(0.0),
        }
    }
    let pending = env.inboxes().help_inbox(tower).len();
    for slot in 0..MESSAGES {
        out[MESSAGE_WIDTH * (1 + MESSAGES) + slot] = if slot < pending { 1.0 } else { 0.0 };
    }
    out[FRAME_MA - 1] = env.ledger().reserve(tower) as f32;
}

/// Single-agent frame: every tower's own reading.
pub fn encode_frame_sa(env: &Environment, out: &mut [f32]) {
    let extent = env.scenario().config.world_extent;
    for (i, obs) in env.observations().iter().enumerate() {
        out[i * MESSAGE_WIDTH..(i + 1) * MESSAGE_WIDTH].copy_from_slice(&encode_local(obs, extent));
    }
}

/// Keeps the previous frame of each agent and produces stacked vectors
/// `[current, previous]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    frame: usize,
    previous: Vec<f32>,
}

impl FrameStack {
    pub fn new(agents: usize, frame: usize) -> Self {
        Self {
            frame,
            previous: vec![0.0; agents * frame],
        }
    }

    pub fn reset(&mut self) {
        self.previous.fill(0.0);
    }

    /// Writes the stacked observation for `agent` and remembers `frame`.
    pub fn push(&mut self, agent: usize, frame: &[f32], out: &mut [f32]) {
        let f = self.frame;
        let prev = &mut self.previous[agent * f..(agent + 1) * f];
        out[..f].copy_from_slice(frame);
        out[f..2 * f].copy_from_slice(prev);
        prev.copy_from_slice(frame);
    }
}

/// Builds stacked observations for every agent of a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Observer {
    layout: ActionLayout,
    stack: FrameStack,
    frame: Vec<f32>,
}

impl Observer {
    pub fn new(layout: ActionLayout, towers: usize) -> Self {
        let agents = match layout {
            ActionLayout::MultiAgent => towers,
            ActionLayout::SingleAgent => 1,
        };
        Self {
            layout,
            stack: FrameStack::new(agents, layout.frame_size()),
            frame: vec![0.0; layout.frame_size()],
        }
    }

    pub fn layout(&self) -> ActionLayout {
        self.layout
    }

    pub fn reset(&mut self) {
        self.stack.reset();
    }

    /// Stacked observations, one row per agent, for the current step.
    pub fn observe(&mut self, env: &Environment, out: &mut Vec<f32>) {
        let width = self.layout.observation_size();
        out.clear();
        match self.layout {
            ActionLayout::MultiAgent => {
                let n = env.tower_count();
                out.resize(n * width, 0.0);
                for tower in 0..n {
                    encode_frame_ma(env, tower, &mut self.frame);
                    self.stack
                        .push(tower, &self.frame, &mut out[tower * width..(tower + 1) * width]);
                }
            }
            ActionLayout::SingleAgent => {
                out.resize(width, 0.0);
                encode_frame_sa(env, &mut self.frame);
                self.stack.push(0, &self.frame, out);
            }
        }
    }
}

/// Support self while the reserve lasts, then idle.
pub fn greedy_act(ledger: &ResourceLedger, tower: usize) -> TowerAction {
    if ledger.reserve_tenths(tower) >= 1 {
        TowerAction::SupportSelf
    } else {
        TowerAction::NoOp
    }
}

/// Draws an index from the categorical distribution given by
/// log-probabilities.
pub fn sample_categorical(log_probs: &[f32], rng: &mut impl rand::Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += libm::exp(f64::from(*lp));
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver of mass; take the last action with support
    log_probs
        .iter()
        .rposition(|lp| lp.is_finite())
        .unwrap_or(log_probs.len() - 1)
}
