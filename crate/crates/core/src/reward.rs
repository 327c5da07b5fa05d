//! Tower performance and the per-step reward split.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::resources::ResourceLedger;

/// Bonus paid to the first helper of a request.
pub const HELP_BONUS: f64 = 0.1;

/// Constants of the broken power law `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceParams {
    pub beta: f64,
    pub s: f64,
    pub x_n: f64,
    pub a: f64,
}

impl Default for PerformanceParams {
    fn default() -> Self {
        Self {
            beta: -1.0,
            s: 2.0,
            x_n: 270.0,
            a: 5.0,
        }
    }
}

/// `(1 + (x * 1000 / x_n)^a)^(beta / s)`.
pub fn performance(x: f64, params: &PerformanceParams) -> f64 {
    let base = x * 1000.0 / params.x_n;
    libm::pow(1.0 + libm::pow(base, params.a), params.beta / params.s)
}

/// Maps the normalised distance onto `[0.5, 0]` for an approaching fire and
/// onto `[0.5, 1]` otherwise. `raw` is clamped to `[0, 1]`.
pub fn remap_x(raw: f64, approaching: bool) -> f64 {
    let raw = raw.clamp(0.0, 1.0);
    if approaching {
        0.5 - 0.5 * raw
    } else {
        0.5 + 0.5 * raw
    }
}

/// Performance of a tower given the distance to its closest observed fire;
/// zero when it observes none.
pub fn tower_performance(
    distance: Option<f64>,
    observation_radius: f64,
    approaching: bool,
    params: &PerformanceParams,
) -> f64 {
    match distance {
        None => 0.0,
        Some(d) => performance(remap_x(d / observation_radius, approaching), params),
    }
}

/// Remembers each tower's last observed fire distance to tell whether the
/// fire is closing in.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproachTracker {
    previous: Vec<Option<f64>>,
}

impl ApproachTracker {
    pub fn new(towers: usize) -> Self {
        Self {
            previous: vec![None; towers],
        }
    }

    /// Records this step's distance and reports whether it decreased. The
    /// first step with a fire in view counts as approaching.
    pub fn update(&mut self, tower: usize, distance: Option<f64>) -> bool {
        let approaching = match (self.previous[tower], distance) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(prev), Some(d)) => d < prev,
        };
        self.previous[tower] = distance;
        approaching
    }
}

/// `sum_target allocation(agent, target) * perf(target)`.
pub fn egoistic_reward(agent: usize, ledger: &ResourceLedger, perfs: &[f64]) -> f64 {
    perfs
        .iter()
        .enumerate()
        .map(|(target, p)| ledger.allocation(agent, target) * p)
        .sum()
}

pub fn collective_reward(perfs: &[f64]) -> f64 {
    if perfs.is_empty() {
        return 0.0;
    }
    perfs.iter().sum::<f64>() / perfs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReward {
    pub egoistic: Vec<f64>,
    pub collective: f64,
    pub bonus: Vec<f64>,
    pub total: Vec<f64>,
}

impl StepReward {
    /// Rewards for all agents; `bonus_count[a]` first responses by agent `a`.
    pub fn compute(ledger: &ResourceLedger, perfs: &[f64], bonus_count: &[u32]) -> Self {
        let n = perfs.len();
        let egoistic: Vec<f64> = (0..n).map(|a| egoistic_reward(a, ledger, perfs)).collect();
        let collective = collective_reward(perfs);
        let bonus: Vec<f64> = bonus_count.iter().map(|&c| f64::from(c) * HELP_BONUS).collect();
        let total = egoistic
            .iter()
            .zip(&bonus)
            .map(|(e, b)| e + collective + b)
            .collect();
        Self {
            egoistic,
            collective,
            bonus,
            total,
        }
    }
}
