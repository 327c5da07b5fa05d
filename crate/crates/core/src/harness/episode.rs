//! One episode of a fixed controller, and the per-episode metrics.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::{CommsEvent, EnvConfig, Environment, Scenario, StepOutcome, TowerAction};
use crate::learner::{ForwardCache, Learner};
use crate::policies::{decode_ma, decode_sa, greedy_act, ActionLayout, Observer};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Chooses every tower's action for the current step.
pub trait Controller {
    /// Called before the first step; `seed` seeds any sampling.
    fn reset(&mut self, env: &Environment, seed: u64);

    /// Called after the observe phase.
    fn act(&mut self, env: &Environment) -> Result<Vec<TowerAction>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyController;

impl Controller for GreedyController {
    fn reset(&mut self, _env: &Environment, _seed: u64) {}

    fn act(&mut self, env: &Environment) -> Result<Vec<TowerAction>> {
        Ok((0..env.tower_count()).map(|t| greedy_act(env.ledger(), t)).collect())
    }
}

/// Samples actions from a trained policy.
#[derive(Debug)]
pub struct PolicyController<'a> {
    learner: &'a Learner,
    observer: Observer,
    rng: Rng,
    cache: ForwardCache<f32>,
    obs: Vec<f32>,
}

impl<'a> PolicyController<'a> {
    pub fn new(learner: &'a Learner, layout: ActionLayout, towers: usize) -> Self {
        Self {
            learner,
            observer: Observer::new(layout, towers),
            rng: rng::stream(0),
            cache: ForwardCache::default(),
            obs: Vec::new(),
        }
    }
}

/// Turns per-agent samples into one action per tower.
pub(crate) fn decode_actions(layout: ActionLayout, picks: &[Vec<usize>]) -> Result<Vec<TowerAction>> {
    match layout {
        ActionLayout::MultiAgent => picks.iter().map(|p| decode_ma(p[0])).collect(),
        ActionLayout::SingleAgent => decode_sa(&picks[0]),
    }
}

impl Controller for PolicyController<'_> {
    fn reset(&mut self, _env: &Environment, seed: u64) {
        self.observer.reset();
        self.rng = rng::stream(seed);
    }

    fn act(&mut self, env: &Environment) -> Result<Vec<TowerAction>> {
        self.observer.observe(env, &mut self.obs);
        let rows = self.obs.len() / self.learner.inputs();
        let samples = self.learner.act(&self.obs, rows, &mut self.rng, &mut self.cache)?;
        let picks: Vec<Vec<usize>> = samples.into_iter().map(|s| s.actions).collect();
        decode_actions(self.observer.layout(), &picks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub scenario_seed: u64,
    pub fire_seed: u64,
    pub difficulty: u8,
    pub steps: u32,
    /// Mean cumulative reward per tower (the headline number).
    pub reward: f64,
    pub agent_returns: Vec<f64>,
    /// Egoistic reward per tower and step.
    pub mean_performance: f64,
    /// Collective reward per step.
    pub mean_collective_performance: f64,
    /// Trees that caught fire during the episode.
    pub fire_count: usize,
    /// Responses that earned the help bonus.
    pub help_count: u32,
    pub help_request_count: u32,
    pub response_count: u32,
    /// Support per tower, averaged over steps.
    pub mean_resource: f64,
    /// Performance of each tower, averaged over steps.
    pub tower_performance: Vec<f64>,
}

/// Folds step outcomes into [`EpisodeMetrics`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeAccumulator {
    returns: Vec<f64>,
    steps: u32,
    egoistic: f64,
    collective: f64,
    help: u32,
    requests: u32,
    responses: u32,
    resource: f64,
    tower_perf: Vec<f64>,
}

impl EpisodeAccumulator {
    pub fn new(towers: usize) -> Self {
        Self {
            returns: vec![0.0; towers],
            steps: 0,
            egoistic: 0.0,
            collective: 0.0,
            help: 0,
            requests: 0,
            responses: 0,
            resource: 0.0,
            tower_perf: vec![0.0; towers],
        }
    }

    pub fn add(&mut self, outcome: &StepOutcome, env: &Environment) {
        let n = self.returns.len() as f64;
        self.steps += 1;
        for (r, t) in self.returns.iter_mut().zip(&outcome.reward.total) {
            *r += t;
        }
        self.egoistic += outcome.reward.egoistic.iter().sum::<f64>() / n;
        self.collective += outcome.reward.collective;
        for (p, q) in self.tower_perf.iter_mut().zip(&outcome.performance) {
            *p += q;
        }
        for e in &outcome.comms {
            match e {
                CommsEvent::Request { .. } => self.requests += 1,
                CommsEvent::Response { bonus, .. } => {
                    self.responses += 1;
                    self.help += u32::from(*bonus);
                }
            }
        }
        let ledger = env.ledger();
        self.resource += (0..self.returns.len()).map(|t| ledger.support(t)).sum::<f64>() / n;
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn finish(self, spec: &EpisodeSpec, env: &Environment) -> EpisodeMetrics {
        let steps = f64::from(self.steps.max(1));
        let n = self.returns.len().max(1) as f64;
        EpisodeMetrics {
            episode: spec.episode,
            scenario_seed: spec.scenario.config.seed,
            fire_seed: spec.fire_seed,
            difficulty: spec.scenario.config.difficulty,
            steps: self.steps,
            reward: self.returns.iter().sum::<f64>() / n,
            agent_returns: self.returns,
            mean_performance: self.egoistic / steps,
            mean_collective_performance: self.collective / steps,
            fire_count: env.fire().burning_count() + env.fire().burned_count(),
            help_count: self.help,
            help_request_count: self.requests,
            response_count: self.responses,
            mean_resource: self.resource / steps,
            tower_performance: self.tower_perf.iter().map(|p| p / steps).collect(),
        }
    }
}

/// Everything that identifies one episode.
#[derive(Debug, Clone)]
pub struct EpisodeSpec {
    pub episode: u64,
    pub scenario: Arc<Scenario>,
    pub env: EnvConfig,
    pub fire_seed: u64,
    /// Seed for the controller's own sampling.
    pub policy_seed: u64,
}

/// Runs `controller` for a full episode. `on_step` sees the environment
/// after each completed step.
pub fn run_episode(
    spec: &EpisodeSpec,
    controller: &mut dyn Controller,
    mut on_step: Option<&mut dyn FnMut(&Environment, &StepOutcome) -> Result<()>>,
) -> Result<EpisodeMetrics> {
    let mut env = Environment::new(spec.scenario.clone(), spec.env, spec.fire_seed);
    controller.reset(&env, spec.policy_seed);
    let mut acc = EpisodeAccumulator::new(env.tower_count());
    loop {
        env.begin_step()?;
        let actions = controller.act(&env)?;
        let outcome = env.finish_step(&actions)?;
        acc.add(&outcome, &env);
        if let Some(f) = on_step.as_mut() {
            f(&env, &outcome)?;
        }
        if outcome.done {
            break;
        }
    }
    if acc.steps() != spec.env.episode_length {
        return Err(Error::Config("episode ended early".into()));
    }
    Ok(acc.finish(spec, &env))
}
