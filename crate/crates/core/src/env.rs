//! The per-episode world and its five-phase step.
//!
//! Each time step runs, in this order:
//!
//! 1. [`Weather`](StepPhase::Weather): weather fields for `t`; at `t = 0` the
//!    fire is ignited.
//! 2. [`Observe`](StepPhase::Observe): inbox delivery, local sensing and the
//!    broadcast of this step's readings.
//! 3. [`Act`](StepPhase::Act): tower actions, ascending tower id.
//! 4. [`Fire`](StepPhase::Fire): spread and burn-out.
//! 5. [`Reward`](StepPhase::Reward): performance on the post-fire state,
//!    help-response resolution and the reward split; `t` advances.
//!
//! Calling a phase out of turn returns [`Error::PhaseOrder`]. After the last
//! step the weather and observe phases may run once more so learners can
//! bootstrap from the final observation; acting then fails with
//! [`Error::EpisodeFinished`].

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::comms::{HelpCondition, HelpRequest, Inboxes};
use crate::fire::{select_ignition, FireState, SpreadRules};
use crate::resources::{Rejection, ResourceLedger};
use crate::reward::{tower_performance, ApproachTracker, PerformanceParams, StepReward};
use crate::rng::{self, Rng};
use crate::scenario::{generate_terrain, place_forest, ForestMap, ScenarioConfig, TerrainGrid};
use crate::towers::{
    build_neighborhoods, closest_observed_fire, observe_local, LocalObservation, NeighborGraph,
    ObservedFire, TowerGrid, NEIGHBOR_COUNT,
};
use crate::weather::{WeatherGenerator, WeatherState};
use crate::{Error, Result, EPISODE_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepPhase {
    Weather,
    Observe,
    Act,
    Fire,
    Reward,
}

impl StepPhase {
    pub const ORDER: [StepPhase; 5] = [
        StepPhase::Weather,
        StepPhase::Observe,
        StepPhase::Act,
        StepPhase::Fire,
        StepPhase::Reward,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn next(self) -> Self {
        Self::ORDER[(self.index() + 1) % Self::ORDER.len()]
    }
}

/// Everything generated once per seed and difficulty.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub terrain: TerrainGrid,
    pub forest: ForestMap,
    pub towers: TowerGrid,
    pub graph: NeighborGraph,
    pub weather: WeatherGenerator,
}

impl Scenario {
    pub fn generate(config: ScenarioConfig) -> Result<Self> {
        let terrain = generate_terrain(&config)?;
        let forest = place_forest(&terrain, &config);
        let towers = TowerGrid::new(&terrain);
        let graph = build_neighborhoods(&towers, NEIGHBOR_COUNT)?;
        let weather = WeatherGenerator::new(config.seed, config.grid_size, config.cell_size());
        Ok(Self {
            config,
            terrain,
            forest,
            towers,
            graph,
            weather,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub episode_length: u32,
    pub spread: SpreadRules,
    pub help_condition: HelpCondition,
    pub performance: PerformanceParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            episode_length: EPISODE_LENGTH,
            spread: SpreadRules::default(),
            help_condition: HelpCondition::default(),
            performance: PerformanceParams::default(),
        }
    }
}

/// What a tower can do in one step. The multi-agent setup uses the first
/// five, the single-agent setup swaps the help actions for
/// [`SupportFireNeighbor`](TowerAction::SupportFireNeighbor).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TowerAction {
    #[default]
    NoOp,
    /// Distribute 0.1 to self.
    SupportSelf,
    /// Distribute 0.1 to the sender of the oldest pending help request.
    SupportRequester,
    /// Take back the oldest own allocation (reserve must be empty).
    Reclaim,
    SendHelpRequest,
    /// Distribute 0.1 to the nearest neighbour that currently sees fire.
    SupportFireNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionRejection {
    Ledger(Rejection),
    NoPendingRequest,
    NoFireNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub action: TowerAction,
    /// Tower whose support changed, if any.
    pub target: Option<usize>,
    /// Help request sent or answered.
    pub request: Option<u64>,
    pub rejection: Option<ActionRejection>,
}

impl ActionOutcome {
    fn new(action: TowerAction) -> Self {
        Self {
            action,
            target: None,
            request: None,
            rejection: None,
        }
    }

    pub fn accepted(&self) -> bool {
        self.rejection.is_none()
    }
}

/// Help-request traffic for the communication log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommsEvent {
    Request {
        id: u64,
        sender: usize,
        sent_at: u32,
        receivers: Vec<usize>,
    },
    Response {
        id: u64,
        sender: usize,
        sent_at: u32,
        responder: usize,
        at: u32,
        bonus: bool,
    },
}

/// Summary of one completed step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub t: u32,
    pub reward: StepReward,
    pub performance: Vec<f64>,
    pub actions: Vec<ActionOutcome>,
    pub comms: Vec<CommsEvent>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Environment {
    scenario: Arc<Scenario>,
    config: EnvConfig,
    t: u32,
    next_phase: StepPhase,
    phase_counts: [u64; 5],
    weather: WeatherState,
    fire: FireState,
    fire_rng: Rng,
    ledger: ResourceLedger,
    inboxes: Inboxes,
    approach: ApproachTracker,
    observations: Vec<LocalObservation>,
    observed: Vec<Option<ObservedFire>>,
    observed_after: Vec<Option<ObservedFire>>,
    performance: Vec<f64>,
    actions: Vec<ActionOutcome>,
    pending_responses: Vec<(HelpRequest, usize)>,
    comms: Vec<CommsEvent>,
}

impl Environment {
    pub fn new(scenario: Arc<Scenario>, config: EnvConfig, fire_seed: u64) -> Self {
        let n = scenario.towers.len();
        let weather = scenario.weather.begin(0);
        Self {
            fire: FireState::new(&scenario.forest),
            ledger: ResourceLedger::new(n),
            inboxes: Inboxes::new(&scenario.graph),
            approach: ApproachTracker::new(n),
            observations: Vec::new(),
            observed: vec![None; n],
            observed_after: vec![None; n],
            performance: vec![0.0; n],
            actions: Vec::new(),
            pending_responses: Vec::new(),
            comms: Vec::new(),
            t: 0,
            next_phase: StepPhase::Weather,
            phase_counts: [0; 5],
            weather,
            fire_rng: rng::stream(fire_seed),
            scenario,
            config,
        }
    }

    fn enter(&mut self, phase: StepPhase) -> Result<()> {
        if self.next_phase != phase {
            return Err(Error::PhaseOrder {
                expected: self.next_phase,
                found: phase,
            });
        }
        let terminal = self.t >= self.config.episode_length;
        if terminal && !matches!(phase, StepPhase::Weather | StepPhase::Observe) {
            return Err(Error::EpisodeFinished(self.t));
        }
        self.phase_counts[phase.index()] += 1;
        self.next_phase = phase.next();
        Ok(())
    }

    pub fn weather_phase(&mut self) -> Result<()> {
        self.enter(StepPhase::Weather)?;
        let sc = &*self.scenario;
        sc.weather.begin_into(self.t, &mut self.weather);
        if self.t == 0 {
            sc.weather.fill_all(&mut self.weather);
            let tree = select_ignition(&self.weather, &sc.forest)?;
            self.fire.ignite(tree, 0);
        }
        for tower in &sc.towers.towers {
            let cell = self.weather.cell_index(tower.position[0], tower.position[2]);
            sc.weather.fill_cell(&mut self.weather, cell);
            sc.weather.fill_wind(&mut self.weather, cell);
        }
        Ok(())
    }

    pub fn observe_phase(&mut self) -> Result<()> {
        self.enter(StepPhase::Observe)?;
        let sc = &*self.scenario;
        self.inboxes.deliver(self.t);
        self.observations.clear();
        for (i, tower) in sc.towers.towers.iter().enumerate() {
            self.observed[i] = closest_observed_fire(tower, &self.fire, &sc.forest);
            self.observations.push(observe_local(
                tower,
                &self.weather,
                &self.fire,
                &sc.forest,
                self.ledger.support(i),
            ));
        }
        self.inboxes.broadcast_step(&self.observations, self.t);
        Ok(())
    }

    /// Applies one action per tower in ascending tower order.
    pub fn act_phase(&mut self, actions: &[TowerAction]) -> Result<()> {
        let n = self.scenario.towers.len();
        if actions.len() != n {
            return Err(Error::DimensionMismatch {
                what: "tower actions",
                expected: n,
                found: actions.len(),
            });
        }
        self.enter(StepPhase::Act)?;
        self.actions.clear();
        self.comms.clear();
        for (agent, &action) in actions.iter().enumerate() {
            let outcome = self.apply(agent, action);
            self.actions.push(outcome);
        }
        Ok(())
    }

    fn apply(&mut self, agent: usize, action: TowerAction) -> ActionOutcome {
        let graph = &self.scenario.graph;
        let mut out = ActionOutcome::new(action);
        let distribute = |ledger: &mut ResourceLedger, out: &mut ActionOutcome, target: usize| {
            match ledger.distribute(graph, agent, target) {
                Ok(()) => out.target = Some(target),
                Err(r) => out.rejection = Some(ActionRejection::Ledger(r)),
            }
        };
        match action {
            TowerAction::NoOp => {}
            TowerAction::SupportSelf => distribute(&mut self.ledger, &mut out, agent),
            TowerAction::SupportRequester => match self.inboxes.oldest_request(agent) {
                None => out.rejection = Some(ActionRejection::NoPendingRequest),
                Some(req) => {
                    out.request = Some(req.id);
                    distribute(&mut self.ledger, &mut out, req.sender);
                    match out.rejection {
                        None => {
                            self.inboxes.remove_request(agent, req.id);
                            self.pending_responses.push((req, agent));
                        }
                        // the requester is out of reach; nothing to keep it for
                        Some(ActionRejection::Ledger(Rejection::InvalidTarget)) => {
                            self.inboxes.remove_request(agent, req.id);
                        }
                        Some(_) => {}
                    }
                }
            },
            TowerAction::Reclaim => match self.ledger.reclaim_oldest(graph, agent) {
                Ok(from) => out.target = Some(from),
                Err(r) => out.rejection = Some(ActionRejection::Ledger(r)),
            },
            TowerAction::SendHelpRequest => {
                let req = self.inboxes.send_help_request(graph, agent, self.t);
                out.request = Some(req.id);
                self.comms.push(CommsEvent::Request {
                    id: req.id,
                    sender: agent,
                    sent_at: req.sent_at,
                    receivers: graph.neighbors(agent).to_vec(),
                });
            }
            TowerAction::SupportFireNeighbor => {
                let target = graph
                    .neighbors(agent)
                    .iter()
                    .copied()
                    .find(|&u| self.observed[u].is_some());
                match target {
                    Some(u) => distribute(&mut self.ledger, &mut out, u),
                    None => out.rejection = Some(ActionRejection::NoFireNeighbor),
                }
            }
        }
        out
    }

    pub fn fire_phase(&mut self) -> Result<()> {
        self.enter(StepPhase::Fire)?;
        let sc = &*self.scenario;
        // only cells a fire can reach this step are materialised
        for &src in self.fire.burning() {
            for &target in sc.forest.spread_candidates(src as usize) {
                let p = sc.forest.trees[target as usize].position;
                let cell = self.weather.cell_index(p[0], p[2]);
                sc.weather.fill_cell(&mut self.weather, cell);
            }
        }
        self.fire
            .step(&sc.forest, &self.weather, &self.config.spread, &mut self.fire_rng);
        Ok(())
    }

    pub fn reward_phase(&mut self) -> Result<StepOutcome> {
        self.enter(StepPhase::Reward)?;
        let sc = &*self.scenario;
        let n = sc.towers.len();
        for (i, tower) in sc.towers.towers.iter().enumerate() {
            let seen = closest_observed_fire(tower, &self.fire, &sc.forest);
            let distance = seen.map(|f| f.distance);
            let approaching = self.approach.update(i, distance);
            self.performance[i] = tower_performance(
                distance,
                tower.observation_radius,
                approaching,
                &self.config.performance,
            );
            self.observed_after[i] = seen;
        }
        let mut bonus = vec![0u32; n];
        for (req, responder) in core::mem::take(&mut self.pending_responses) {
            let helps = match self.config.help_condition {
                HelpCondition::ObservedFire => self.observed_after[req.sender].is_some(),
                HelpCondition::Always => true,
            };
            let got = self
                .inboxes
                .register_response(&sc.graph, &req, responder, self.t, helps);
            if got {
                bonus[responder] += 1;
            }
            self.comms.push(CommsEvent::Response {
                id: req.id,
                sender: req.sender,
                sent_at: req.sent_at,
                responder,
                at: self.t,
                bonus: got,
            });
        }
        let reward = StepReward::compute(&self.ledger, &self.performance, &bonus);
        if !reward.total.iter().all(|r| r.is_finite()) {
            return Err(Error::NonFinite("step reward"));
        }
        let outcome = StepOutcome {
            t: self.t,
            reward,
            performance: self.performance.clone(),
            actions: self.actions.clone(),
            comms: self.comms.clone(),
            done: self.t + 1 >= self.config.episode_length,
        };
        self.t += 1;
        Ok(outcome)
    }

    /// Weather and observe phases.
    pub fn begin_step(&mut self) -> Result<()> {
        self.weather_phase()?;
        self.observe_phase()
    }

    /// Act, fire and reward phases.
    pub fn finish_step(&mut self, actions: &[TowerAction]) -> Result<StepOutcome> {
        self.act_phase(actions)?;
        self.fire_phase()?;
        self.reward_phase()
    }

    pub fn step(&mut self, actions: &[TowerAction]) -> Result<StepOutcome> {
        self.begin_step()?;
        self.finish_step(actions)
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.config.episode_length
    }

    pub fn next_phase(&self) -> StepPhase {
        self.next_phase
    }

    /// How many times each phase has run, indexed like [`StepPhase::ORDER`].
    pub fn phase_counts(&self) -> [u64; 5] {
        self.phase_counts
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Weather of the current step. Only the cells the simulation needed
    /// (tower cells, cells a fire could spread into; everything at `t = 0`)
    /// are filled, the rest are NaN; the scenario's generator gives full
    /// fields.
    pub fn weather(&self) -> &WeatherState {
        &self.weather
    }

    pub fn fire(&self) -> &FireState {
        &self.fire
    }

    pub fn ledger(&self) -> &ResourceLedger {
        &self.ledger
    }

    pub fn inboxes(&self) -> &Inboxes {
        &self.inboxes
    }

    pub fn graph(&self) -> &NeighborGraph {
        &self.scenario.graph
    }

    pub fn tower_count(&self) -> usize {
        self.scenario.towers.len()
    }

    /// Readings taken in the last observe phase.
    pub fn observations(&self) -> &[LocalObservation] {
        &self.observations
    }

    /// Closest fire per tower as of the last observe phase.
    pub fn observed_fires(&self) -> &[Option<ObservedFire>] {
        &self.observed
    }

    /// Closest fire per tower after the last fire phase.
    pub fn observed_fires_after_step(&self) -> &[Option<ObservedFire>] {
        &self.observed_after
    }

    pub fn fire_rng(&self) -> &Rng {
        &self.fire_rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comms::HELP_REQUEST_TTL;
    use crate::towers::TOWER_COUNT;

    fn scenario() -> Arc<Scenario> {
        Arc::new(Scenario::generate(ScenarioConfig::new(0, 1).unwrap()).unwrap())
    }

    fn noop() -> [TowerAction; TOWER_COUNT] {
        [TowerAction::NoOp; TOWER_COUNT]
    }

    #[test]
    fn phases_must_run_in_order() {
        let mut env = Environment::new(scenario(), EnvConfig::default(), 1);
        assert!(matches!(
            env.observe_phase(),
            Err(Error::PhaseOrder {
                expected: StepPhase::Weather,
                found: StepPhase::Observe
            })
        ));
        env.weather_phase().unwrap();
        assert!(matches!(env.fire_phase(), Err(Error::PhaseOrder { .. })));
        assert!(matches!(env.act_phase(&noop()), Err(Error::PhaseOrder { .. })));
        env.observe_phase().unwrap();
        assert!(matches!(env.reward_phase(), Err(Error::PhaseOrder { .. })));
        env.act_phase(&noop()).unwrap();
        env.fire_phase().unwrap();
        env.reward_phase().unwrap();
        assert_eq!(env.phase_counts(), [1; 5]);
        assert_eq!(env.t(), 1);
    }

    #[test]
    fn episode_has_fixed_length_and_terminal_observation() {
        let config = EnvConfig {
            episode_length: 12,
            ..EnvConfig::default()
        };
        let mut env = Environment::new(scenario(), config, 1);
        let mut steps = 0;
        loop {
            let out = env.step(&noop()).unwrap();
            steps += 1;
            if out.done {
                break;
            }
        }
        assert_eq!(steps, 12);
        env.begin_step().unwrap();
        assert_eq!(env.observations().len(), TOWER_COUNT);
        assert!(matches!(env.act_phase(&noop()), Err(Error::EpisodeFinished(12))));
    }

    #[test]
    fn fire_is_ignited_at_step_zero() {
        let mut env = Environment::new(scenario(), EnvConfig::default(), 1);
        env.weather_phase().unwrap();
        assert_eq!(env.fire().burning_count(), 1);
        assert_eq!(env.fire().ignition_step, Some(0));
    }

    #[test]
    fn ledger_actions_and_rejections() {
        let mut env = Environment::new(scenario(), EnvConfig::default(), 1);
        let mut acts = noop();
        acts[0] = TowerAction::SupportSelf;
        acts[1] = TowerAction::Reclaim;
        acts[2] = TowerAction::SupportRequester;
        let out = env.step(&acts).unwrap();
        assert_eq!(out.actions[0].target, Some(0));
        assert_eq!(
            out.actions[1].rejection,
            Some(ActionRejection::Ledger(Rejection::ReserveNotEmpty))
        );
        assert_eq!(out.actions[2].rejection, Some(ActionRejection::NoPendingRequest));
        assert_eq!(env.ledger().support(0), 0.1);
        assert!(env.ledger().is_consistent());
    }

    /// Drives a request from tower 4 and a response from tower 1 under the
    /// given help condition; returns the step outcomes from t = 0.
    fn help_trace(condition: HelpCondition, respond_at: u32, responders: &[usize]) -> Vec<StepOutcome> {
        let config = EnvConfig {
            help_condition: condition,
            ..EnvConfig::default()
        };
        let mut env = Environment::new(scenario(), config, 1);
        let mut outs = Vec::new();
        for t in 0..12 {
            let mut acts = noop();
            if t == 3 {
                acts[4] = TowerAction::SendHelpRequest;
            }
            if t == respond_at {
                for &r in responders {
                    acts[r] = TowerAction::SupportRequester;
                }
            }
            outs.push(env.step(&acts).unwrap());
        }
        outs
    }

    #[test]
    fn request_visible_next_step_and_only_first_responder_paid() {
        // 4 sends to 1, 3, 5; all three respond at t = 4
        let outs = help_trace(HelpCondition::Always, 4, &[1, 3, 5]);
        let bonus: Vec<f64> = outs[4].reward.bonus.clone();
        assert_eq!(bonus[1], 0.1);
        assert_eq!(bonus[3], 0.0);
        assert_eq!(bonus[5], 0.0);
        // 3 and 5 still paid support to 4, but no bonus
        assert_eq!(outs[4].actions[3].target, Some(4));
        assert_eq!(outs[4].actions[5].target, Some(4));
        let total: f64 = outs.iter().flat_map(|o| o.reward.bonus.iter()).sum();
        assert!((total - 0.1).abs() < 1e-12);
    }

    #[test]
    fn response_at_send_step_is_impossible() {
        let outs = help_trace(HelpCondition::Always, 3, &[1]);
        assert_eq!(outs[3].actions[1].rejection, Some(ActionRejection::NoPendingRequest));
        assert!(outs.iter().all(|o| o.reward.bonus.iter().all(|b| *b == 0.0)));
    }

    #[test]
    fn request_expires() {
        let outs = help_trace(HelpCondition::Always, 4 + HELP_REQUEST_TTL, &[1]);
        assert_eq!(
            outs[(4 + HELP_REQUEST_TTL) as usize].actions[1].rejection,
            Some(ActionRejection::NoPendingRequest)
        );
    }

    #[test]
    fn bonus_requires_observed_fire_by_default() {
        let sc = scenario();
        let outs = help_trace(HelpCondition::ObservedFire, 4, &[1]);
        let mut env = Environment::new(sc, EnvConfig::default(), 1);
        for _ in 0..5 {
            env.step(&noop()).unwrap();
        }
        let sees = env.observed_fires_after_step()[4].is_some();
        assert_eq!(outs[4].reward.bonus[1] > 0.0, sees);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let run = |seed| {
            let mut env = Environment::new(scenario(), EnvConfig::default(), seed);
            let mut acts = noop();
            acts[4] = TowerAction::SupportSelf;
            (0..60)
                .map(|_| env.step(&acts).unwrap().reward.total)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
    }
}
