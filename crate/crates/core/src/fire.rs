//! Fire ignition, probabilistic spread and burn-out.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::scenario::{distance3, ForestMap, Tree, TreeState, SPREAD_RADIUS};
use crate::weather::WeatherState;
use crate::{Error, Result};

/// Steps a tree keeps burning once ignited.
pub const BURN_STEPS: u8 = 10;
pub const WIND_ANGLE_LIMIT_DEG: f64 = 45.0;
pub const TEMPERATURE_THRESHOLD: f64 = 21.0;
pub const HUMIDITY_THRESHOLD: f64 = 0.5;

const PROBABILITY_BY_COUNT: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Which side of the humidity threshold favours spread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumidityRule {
    /// Humidity above the threshold adds to the spread probability.
    #[default]
    AboveThreshold,
    /// Humidity below the threshold adds instead.
    BelowThreshold,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpreadRules {
    pub humidity: HumidityRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeStatus {
    Alive,
    Burning { timer: u8 },
    Burned,
}

/// Dynamic fire state over a [`ForestMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct FireState {
    status: Vec<TreeStatus>,
    /// Burning tree indices, ascending.
    burning: Vec<u32>,
    burned_count: usize,
    pub ignition_step: Option<u32>,
    pub ignition_tree: Option<usize>,
}

impl FireState {
    pub fn new(forest: &ForestMap) -> Self {
        let status = forest
            .trees
            .iter()
            .map(|t| match t.state {
                TreeState::Alive => TreeStatus::Alive,
                TreeState::Burning => TreeStatus::Burning {
                    timer: t.burn_timer.max(1),
                },
                TreeState::Burned => TreeStatus::Burned,
            })
            .collect::<Vec<_>>();
        let burning = status
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, TreeStatus::Burning { .. }))
            .map(|(i, _)| i as u32)
            .collect();
        let burned_count = status.iter().filter(|s| **s == TreeStatus::Burned).count();
        Self {
            status,
            burning,
            burned_count,
            ignition_step: None,
            ignition_tree: None,
        }
    }

    /// Sets `tree` burning with a full timer. No-op unless it is alive.
    pub fn ignite(&mut self, tree: usize, step: u32) {
        if self.status[tree] != TreeStatus::Alive {
            return;
        }
        self.status[tree] = TreeStatus::Burning { timer: BURN_STEPS };
        let pos = self.burning.partition_point(|&i| (i as usize) < tree);
        self.burning.insert(pos, tree as u32);
        if self.ignition_step.is_none() {
            self.ignition_step = Some(step);
            self.ignition_tree = Some(tree);
        }
    }

    pub fn status(&self, tree: usize) -> TreeStatus {
        self.status[tree]
    }

    pub fn burning(&self) -> &[u32] {
        &self.burning
    }

    pub fn burning_count(&self) -> usize {
        self.burning.len()
    }

    pub fn burned_count(&self) -> usize {
        self.burned_count
    }

    pub fn is_burning(&self, tree: usize) -> bool {
        matches!(self.status[tree], TreeStatus::Burning { .. })
    }

    pub fn is_burned(&self, tree: usize) -> bool {
        self.status[tree] == TreeStatus::Burned
    }

    /// Advances one time step in place.
    ///
    /// Every tree burning at the start of the step tries to ignite each alive
    /// spread candidate once, in ascending (source, target) order. Timers of
    /// those sources then drop by one and trees reaching zero burn out. Trees
    /// ignited during the step start with a full timer.
    pub fn step(
        &mut self,
        forest: &ForestMap,
        weather: &WeatherState,
        rules: &SpreadRules,
        rng: &mut impl rand::Rng,
    ) {
        let sources = core::mem::take(&mut self.burning);
        let mut ignited = Vec::new();
        for &s in &sources {
            let source = &forest.trees[s as usize];
            for &target in forest.spread_candidates(s as usize) {
                if self.status[target as usize] != TreeStatus::Alive {
                    continue;
                }
                let p = spread_probability(source, &forest.trees[target as usize], weather, rules);
                if p > 0.0 && rng.random::<f64>() < p {
                    self.status[target as usize] = TreeStatus::Burning { timer: BURN_STEPS };
                    ignited.push(target);
                }
            }
        }

        let mut still_burning = Vec::with_capacity(sources.len() + ignited.len());
        for &s in &sources {
            let st = &mut self.status[s as usize];
            if let TreeStatus::Burning { timer } = *st {
                if timer <= 1 {
                    *st = TreeStatus::Burned;
                    self.burned_count += 1;
                } else {
                    *st = TreeStatus::Burning { timer: timer - 1 };
                    still_burning.push(s);
                }
            }
        }
        still_burning.extend_from_slice(&ignited);
        still_burning.sort_unstable();
        self.burning = still_burning;
    }
}

/// Functional form of [`FireState::step`].
pub fn step_fire(
    fire: &FireState,
    forest: &ForestMap,
    weather: &WeatherState,
    rules: &SpreadRules,
    rng: &mut impl rand::Rng,
) -> FireState {
    let mut next = fire.clone();
    next.step(forest, weather, rules, rng);
    next
}

/// Number of spread conditions met for `source -> target`, ignoring distance.
pub fn spread_conditions(
    source: &Tree,
    target: &Tree,
    weather: &WeatherState,
    rules: &SpreadRules,
) -> usize {
    let [sx, sy, sz] = source.position;
    let [tx, ty, tz] = target.position;
    let cell = weather.cell_index(tx, tz);

    let dx = tx - sx;
    let dz = tz - sz;
    let norm = libm::sqrt(dx * dx + dz * dz);
    let wind = weather.main_wind_direction;
    let downwind = norm > 0.0 && {
        let cos = (wind[0] * dx + wind[1] * dz) / norm;
        cos > libm::cos(WIND_ANGLE_LIMIT_DEG.to_radians())
    };
    let uphill = ty > sy;
    let hot = weather.temperature[cell] > TEMPERATURE_THRESHOLD;
    let humid = match rules.humidity {
        HumidityRule::AboveThreshold => weather.humidity[cell] > HUMIDITY_THRESHOLD,
        HumidityRule::BelowThreshold => weather.humidity[cell] < HUMIDITY_THRESHOLD,
    };
    let clear = weather.overcast[cell] == 0.0;
    [downwind, uphill, hot, humid, clear]
        .iter()
        .filter(|c| **c)
        .count()
}

/// Probability that a burning `source` ignites `target` this step.
pub fn spread_probability(
    source: &Tree,
    target: &Tree,
    weather: &WeatherState,
    rules: &SpreadRules,
) -> f64 {
    if distance3(&source.position, &target.position) > SPREAD_RADIUS {
        return 0.0;
    }
    PROBABILITY_BY_COUNT[spread_conditions(source, target, weather, rules)]
}

/// Ignition score: low overcast, high (min-max normalised) temperature and
/// low humidity, equally weighted.
pub fn ignition_score(weather: &WeatherState, tree: &Tree, temp_range: (f64, f64)) -> f64 {
    let cell = weather.cell_index(tree.position[0], tree.position[2]);
    let (lo, hi) = temp_range;
    let temp = if hi > lo {
        (weather.temperature[cell] - lo) / (hi - lo)
    } else {
        0.0
    };
    (1.0 - weather.overcast[cell]) + temp + (1.0 - weather.humidity[cell])
}

/// Alive tree with the highest [`ignition_score`]; ties go to the lower index.
pub fn select_ignition(weather: &WeatherState, forest: &ForestMap) -> Result<usize> {
    let range = weather.temperature_range();
    let mut best: Option<(usize, f64)> = None;
    for (i, tree) in forest.trees.iter().enumerate() {
        if tree.state != TreeState::Alive {
            continue;
        }
        let score = ignition_score(weather, tree, range);
        match best {
            Some((_, b)) if score <= b => {}
            _ => best = Some((i, score)),
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoIgnition)
}
