//! Acceptance criteria 1 to 10. Each test prints one `PASS` or `FAIL` line
//! straight to stdout, so the verdicts show up even when output is
//! captured.
//!
//! Criteria 9 and 10 are directional learning experiments. Their verdict
//! is printed; the test itself only fails if the experiment cannot be run.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use lookout::run::{self, EvalPlan, Policy, TrainOptions};
use lookout_core::curriculum::{default_lessons, Curriculum};
use lookout_core::env::{EnvConfig, Environment, Scenario, TowerAction};
use lookout_core::fire::{spread_conditions, spread_probability, step_fire, FireState, SpreadRules};
use lookout_core::harness::{evaluate, EvalSpec, ExperimentConfig, GreedyController, PolicyController, SeedMode, Setup};
use lookout_core::learner::{
    clip_objective, compute_gae, surrogate_loss, ForwardCache, LossCoefficients, Minibatch, NetworkSpec, PolicyNetwork,
};
use lookout_core::nn::log_softmax;
use lookout_core::resources::ResourceLedger;
use lookout_core::reward::{performance, PerformanceParams};
use lookout_core::rng;
use lookout_core::scenario::{ForestMap, ScenarioConfig, Tree, TreeState};
use lookout_core::towers::TOWER_COUNT;
use lookout_core::weather::WeatherState;
use lookout_core::comms::HelpCondition;
use rand::Rng;

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let word = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "criterion {n:>2} {word}: {name}: {detail}");
    let _ = out.flush();
}

// 1 -------------------------------------------------------------------------

/// Performance written out from the formula, independent of the library.
fn performance_oracle(x: f64) -> f64 {
    (1.0 + (x * 1000.0 / 270.0).powf(5.0)).powf(-1.0 / 2.0)
}

#[test]
fn criterion_01_reward_formula() {
    let p = PerformanceParams::default();
    let mut r = rng::stream(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let x: f64 = r.random_range(0.0..=1.0);
        worst = worst.max((performance(x, &p) - performance_oracle(x)).abs());
    }
    let anchors = [
        (performance(0.0, &p) - 1.0).abs(),
        (performance(0.27, &p) - 2f64.powf(-0.5)).abs(),
        (performance(0.54, &p) - 33f64.powf(-0.5)).abs(),
    ];
    let anchor_err = anchors.iter().copied().fold(0.0, f64::max);
    let pass = worst <= 1e-12 && anchor_err <= 1e-12;
    verdict(
        1,
        "reward formula",
        pass,
        &format!("max error {worst:.2e} over 1e4 points, anchors {anchor_err:.2e}"),
    );
    assert!(pass);
}

// 2 -------------------------------------------------------------------------

fn tree(x: f64, y: f64, z: f64) -> Tree {
    Tree {
        position: [x, y, z],
        state: TreeState::Alive,
        burn_timer: 0,
    }
}

/// Weather and target with exactly the first `k` of downwind, uphill,
/// hot, humid and clear holding for a source at (20, 0, 20).
fn setup_with(k: usize) -> (WeatherState, Tree) {
    let wind = if k > 0 { [1.0, 0.0] } else { [-1.0, 0.0] };
    let temp = if k > 2 { 30.0 } else { 15.0 };
    let hum = if k > 3 { 0.8 } else { 0.2 };
    let oc = if k > 4 { 0.0 } else { 0.5 };
    let w = WeatherState::uniform(10, 10.0, wind, oc, temp, hum);
    let y = if k > 1 { 1.0 } else { 0.0 };
    (w, tree(25.0, y, 20.0))
}

#[test]
fn criterion_02_fire_spread_statistics() {
    let rules = SpreadRules::default();
    let source = tree(20.0, 0.0, 20.0);
    let trials = 10_000;
    let mut r = rng::stream(2);
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 0..=5 {
        let (w, target) = setup_with(k);
        assert_eq!(spread_conditions(&source, &target, &w, &rules), k);
        let forest = ForestMap::from_trees(vec![source, target]);
        let mut fire = FireState::new(&forest);
        fire.ignite(0, 0);
        let hits = (0..trials)
            .filter(|_| step_fire(&fire, &forest, &w, &rules, &mut r).is_burning(1))
            .count();
        let p = 0.2 * k as f64;
        let freq = hits as f64 / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let ok = (freq - p).abs() <= 3.0 * sigma + 1e-12;
        pass &= ok;
        parts.push(format!("k={k} {freq:.4}"));
    }
    // far pairs under conditions that would otherwise always spread
    let (w, _) = setup_with(5);
    let mut far_spread = 0;
    for _ in 0..100_000 {
        let s = tree(r.random_range(0.0..100.0), r.random_range(0.0..5.0), r.random_range(0.0..100.0));
        let t = loop {
            let t = tree(r.random_range(0.0..100.0), r.random_range(0.0..5.0), r.random_range(0.0..100.0));
            let d: f64 = (0..3).map(|i| (t.position[i] - s.position[i]).powi(2)).sum::<f64>().sqrt();
            if d > 10.0 {
                break t;
            }
        };
        if spread_probability(&s, &t, &w, &rules) != 0.0 {
            far_spread += 1;
        }
    }
    pass &= far_spread == 0;
    verdict(
        2,
        "fire spread statistics",
        pass,
        &format!("{}; spreads beyond 10 m: {far_spread}/100000", parts.join(", ")),
    );
    assert!(pass);
}

// 3 -------------------------------------------------------------------------

#[test]
fn criterion_03_resource_conservation() {
    let scenario = Scenario::generate(ScenarioConfig::new(0, 1).unwrap()).unwrap();
    let g = &scenario.graph;
    let mut l = ResourceLedger::new(TOWER_COUNT);
    let mut r = rng::stream(3);
    let mut ok = true;
    let mut accepted = 0;
    for _ in 0..100_000 {
        let owner = r.random_range(0..TOWER_COUNT);
        let target = r.random_range(0..TOWER_COUNT);
        let res = if r.random_bool(0.5) {
            l.distribute(g, owner, target)
        } else {
            l.deduct(g, owner, target)
        };
        accepted += usize::from(res.is_ok());
        let reserve: u32 = (0..TOWER_COUNT).map(|t| l.reserve_tenths(t)).sum();
        let support: u32 = (0..TOWER_COUNT).map(|t| l.support_tenths(t)).sum();
        ok &= reserve + support == 90;
        for o in 0..TOWER_COUNT {
            let placed: u32 = (0..TOWER_COUNT).map(|t| l.allocation_tenths(o, t)).sum();
            ok &= placed + l.reserve_tenths(o) == 10;
        }
    }
    let total: f64 = (0..TOWER_COUNT).map(|t| l.reserve(t) + l.support(t)).sum();
    verdict(
        3,
        "resource conservation",
        ok,
        &format!("1e5 attempts ({accepted} accepted), final total {total:.1}"),
    );
    assert!(ok);
}

// 4 -------------------------------------------------------------------------

/// Advantages by the explicit double sum of discounted TD errors.
fn gae_oracle(r: &[f64], v: &[f64], d: &[bool], boot: f64, g: f64, l: f64) -> Vec<f64> {
    let n = r.len();
    (0..n)
        .map(|t| {
            let mut s = 0.0;
            let mut w = 1.0;
            for k in t..n {
                let next = if d[k] {
                    0.0
                } else if k + 1 < n {
                    v[k + 1]
                } else {
                    boot
                };
                s += w * (r[k] + g * next - v[k]);
                if d[k] {
                    break;
                }
                w *= g * l;
            }
            s
        })
        .collect()
}

#[test]
fn criterion_04_gae_oracle() {
    let mut r = rng::stream(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = r.random_range(1..=64);
        let rew: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let val: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let mut done = vec![false; n];
        if r.random_bool(0.5) {
            done[n - 1] = true;
        }
        let boot = r.random_range(-1.0..1.0);
        let (adv, ret) = compute_gae(&rew, &val, &done, boot, 0.99, 0.95).unwrap();
        let o = gae_oracle(&rew, &val, &done, boot, 0.99, 0.95);
        for t in 0..n {
            worst = worst.max((adv[t] - o[t]).abs()).max((ret[t] - o[t] - val[t]).abs());
        }
    }
    let pass = worst <= 1e-8;
    verdict(4, "GAE oracle", pass, &format!("max error {worst:.2e} over 1000 trajectories"));
    assert!(pass);
}

// 5 -------------------------------------------------------------------------

fn surrogate_fd_error(seed: u64) -> f64 {
    let net = PolicyNetwork::new(NetworkSpec {
        inputs: 6,
        branches: vec![4],
        hidden_units: 10,
        num_layers: 2,
        graph_encoder: false,
    })
    .unwrap();
    let mut r = rng::stream(seed);
    let mut params: Vec<f64> = net.init(&mut r);
    for v in params.iter_mut() {
        *v = *v * 1.5 + r.random_range(-0.05..0.05);
    }
    let rows = 8;
    let obs: Vec<f64> = (0..rows * 6).map(|_| r.random_range(0.0..1.0)).collect();
    let actions: Vec<usize> = (0..rows).map(|_| r.random_range(0..4)).collect();
    let mut cache = ForwardCache::default();
    net.forward(&params, &obs, rows, &mut cache);
    let mut lp = vec![0.0; 4];
    let old: Vec<f64> = (0..rows)
        .map(|i| {
            log_softmax(&cache.logits[i * 4..i * 4 + 4], &mut lp);
            // a third of the rows far enough away to be clipped
            lp[actions[i]] + if i % 3 == 0 { 0.5 } else { r.random_range(-0.1..0.1) }
        })
        .collect();
    let adv: Vec<f64> = (0..rows).map(|i| if i % 2 == 0 { 1.1 } else { -0.9 }).collect();
    let ret: Vec<f64> = (0..rows).map(|_| r.random_range(-1.0..1.0)).collect();
    let mb = Minibatch {
        obs: &obs,
        actions: &actions,
        old_log_prob: &old,
        advantages: &adv,
        returns: &ret,
    };
    let coef = LossCoefficients {
        epsilon: 0.2,
        beta: 0.01,
        value_coef: 0.5,
    };
    let n = params.len();
    let mut grads = vec![0.0; n];
    surrogate_loss(&net, &params, &mb, &coef, &mut cache, &mut grads);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut scratch = vec![0.0; n];
    for k in 0..n {
        let mut p = params.clone();
        p[k] += h;
        let up = surrogate_loss(&net, &p, &mb, &coef, &mut cache, &mut scratch).total;
        p[k] -= 2.0 * h;
        let down = surrogate_loss(&net, &p, &mb, &coef, &mut cache, &mut scratch).total;
        let fd = (up - down) / (2.0 * h);
        let scale = fd.abs().max(grads[k].abs());
        if scale > 1e-7 {
            worst = worst.max((fd - grads[k]).abs() / scale);
        }
    }
    worst
}

#[test]
fn criterion_05_clip_objective() {
    // g(eps, A) = (1 + eps) A for A >= 0, (1 - eps) A otherwise
    let cases = [
        (1.0, 1.0, 0.2, 1.0),
        (1.5, 1.0, 0.2, 1.2),
        (0.5, -1.0, 0.2, -0.8),
        (0.5, 1.0, 0.2, 0.5),
        (1.5, -1.0, 0.2, -1.5),
        (1.0, 0.0, 0.2, 0.0),
    ];
    let mut exact = true;
    for (ratio, adv, eps, want) in cases {
        exact &= (clip_objective(ratio, adv, eps) - want).abs() < 1e-15;
    }
    let worst = surrogate_fd_error(5).max(surrogate_fd_error(55));
    let pass = exact && worst <= 1e-4;
    verdict(
        5,
        "clip objective",
        pass,
        &format!("hand cases exact: {exact}; surrogate gradient max relative error {worst:.2e}"),
    );
    assert!(pass);
}

// 6 -------------------------------------------------------------------------

/// Transition episodes by direct simulation of the lesson rule.
fn lesson_oracle(rewards: &[f64]) -> Vec<u64> {
    let thresholds: Vec<f64> = (0..9).map(|i| 900.0 + 50.0 * i as f64).collect();
    let (mut lesson, mut count, mut smooth) = (0usize, 0u32, 0.0f64);
    let mut out = Vec::new();
    for (e, &r) in rewards.iter().enumerate() {
        count += 1;
        smooth = 0.99 * smooth + 0.01 * r;
        if lesson < 9 && count >= 100 && smooth >= thresholds[lesson] {
            lesson += 1;
            count = 0;
            out.push(e as u64);
        }
    }
    out
}

fn replay_curriculum(rewards: &[f64]) -> (Vec<u64>, bool) {
    let mut c = Curriculum::new(default_lessons(), 0.99);
    let mut out = Vec::new();
    let mut monotone = true;
    let mut last = 0;
    for (e, &r) in rewards.iter().enumerate() {
        if let Some(t) = c.update(r) {
            monotone &= t.to == t.from + 1;
            out.push(e as u64);
        }
        monotone &= c.state.lesson >= last;
        last = c.state.lesson;
    }
    (out, monotone)
}

#[test]
fn criterion_06_curriculum() {
    let lessons = default_lessons();
    let table_ok = lessons.len() == 10
        && lessons.iter().all(|l| l.min_length == 100)
        && lessons[0].threshold == Some(900.0)
        && lessons[8].threshold == Some(1300.0)
        && lessons[9].threshold.is_none();
    let mut r = rng::stream(6);
    let streams: Vec<(&str, Vec<f64>)> = vec![
        ("constant 2000", vec![2000.0; 1500]),
        ("constant 850", vec![850.0; 1500]),
        ("ramp", (0..3000).map(|e| e as f64).collect()),
        ("noisy", (0..3000).map(|e| 600.0 + 0.3 * e as f64 + r.random_range(-400.0..400.0)).collect()),
        ("rise then crash", (0..2000).map(|e| if e < 700 { 3000.0 } else { 0.0 }).collect()),
    ];
    let mut pass = table_ok;
    let mut parts = Vec::new();
    for (name, s) in &streams {
        let (got, monotone) = replay_curriculum(s);
        let want = lesson_oracle(s);
        pass &= got == want && monotone;
        parts.push(format!("{name}: {} transitions", got.len()));
    }
    // closed form for a constant stream well above every threshold
    let (got, _) = replay_curriculum(&streams[0].1);
    let closed: Vec<u64> = (1..10).map(|i| 100 * i - 1).collect();
    pass &= got == closed;
    verdict(6, "curriculum state machine", pass, &parts.join(", "));
    assert!(pass);
}

// 7 -------------------------------------------------------------------------

#[test]
fn criterion_07_protocol_timing() {
    let scenario = Arc::new(Scenario::generate(ScenarioConfig::new(0, 1).unwrap()).unwrap());
    let config = EnvConfig {
        help_condition: HelpCondition::Always,
        ..EnvConfig::default()
    };
    let mut env = Environment::new(scenario, config, 1);
    let requester = 4;
    let neighbours = env.graph().neighbors(requester).to_vec();
    let mut broadcast_ok = true;
    let mut request_ok = true;
    let mut landing_ok = true;
    let mut bonus_ok = true;
    let mut sent = Vec::new();
    let mut support_seen = Vec::new();
    for t in 0..10u32 {
        env.begin_step().unwrap();
        // broadcasts read at t were sent at t - 1, carrying that step's observation
        for u in 0..TOWER_COUNT {
            for (slot, &v) in env.graph().neighbors(u).iter().enumerate() {
                let msg = env.inboxes().broadcasts(u)[slot];
                match (t, msg) {
                    (0, m) => broadcast_ok &= m.is_none(),
                    (_, Some(m)) => {
                        broadcast_ok &= m.sent_at == t - 1 && m.sender == v;
                        let prev: &Vec<_> = &sent[(t - 1) as usize];
                        broadcast_ok &= m.observation == prev[v];
                    }
                    (_, None) => broadcast_ok = false,
                }
            }
        }
        sent.push(env.observations().to_vec());
        support_seen.push(env.observations()[requester].prep);
        let inbox_has = |u: usize| env.inboxes().help_inbox(u).iter().any(|r| r.sender == requester);
        for &u in &neighbours {
            request_ok &= inbox_has(u) == (t == 4);
        }
        let mut acts = [TowerAction::NoOp; TOWER_COUNT];
        if t == 3 {
            acts[requester] = TowerAction::SendHelpRequest;
        }
        if t == 4 {
            for &u in &neighbours {
                acts[u] = TowerAction::SupportRequester;
            }
        }
        let out = env.finish_step(&acts).unwrap();
        let paid: Vec<usize> = (0..TOWER_COUNT).filter(|&i| out.reward.bonus[i] > 0.0).collect();
        if t == 4 {
            // ascending tower order: the lowest-numbered neighbour answers first
            let first = *neighbours.iter().min().unwrap();
            bonus_ok &= paid == vec![first] && out.reward.bonus[first] == 0.1;
        } else {
            bonus_ok &= paid.is_empty();
        }
    }
    // support sent at t = 4 shows in the requester's observation from t = 5
    landing_ok &= support_seen[4] == support_seen[3];
    landing_ok &= (support_seen[5] - support_seen[4] - 0.1 * neighbours.len() as f64).abs() < 1e-9;
    let pass = broadcast_ok && request_ok && landing_ok && bonus_ok;
    verdict(
        7,
        "protocol timing",
        pass,
        &format!(
            "broadcast at t+1: {broadcast_ok}, request readable at t+1 only: {request_ok}, \
             response lands at t+2: {landing_ok}, first responder only: {bonus_ok}"
        ),
    );
    assert!(pass);
}

// 8 -------------------------------------------------------------------------

#[test]
fn criterion_08_determinism() {
    let config = ExperimentConfig {
        total_steps: 50_000,
        ..ExperimentConfig::for_setup(Setup::MultiAgent)
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let started = Instant::now();
    let opts = TrainOptions {
        quiet: true,
        ..TrainOptions::default()
    };
    let outcomes: Vec<_> = dirs
        .iter()
        .map(|d| run::train(&config, d.path(), &opts).unwrap())
        .collect();
    let mut same = true;
    let mut rows = 0;
    for f in [run::EPISODES_CSV, run::SUMMARY_CSV, run::LESSONS_CSV] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        same &= a == b;
        rows += a.iter().filter(|&&c| c == b'\n').count();
    }
    let ck: Vec<Vec<u8>> = outcomes
        .iter()
        .map(|o| std::fs::read(o.last_checkpoint.as_ref().unwrap()).unwrap())
        .collect();
    same &= ck[0] == ck[1];
    verdict(
        8,
        "determinism",
        same,
        &format!(
            "two 5e4-step runs, {rows} CSV lines and final checkpoints identical: {same} ({:.0} s)",
            started.elapsed().as_secs_f64()
        ),
    );
    assert!(same);
}

// 9 -------------------------------------------------------------------------

fn fixed_spec(config: &ExperimentConfig) -> EvalSpec {
    EvalSpec {
        seed: SeedMode::Fixed(0),
        difficulty: 1,
        episodes: 20,
        master_seed: config.master_seed,
        env: config.env_config(),
    }
}

#[test]
fn criterion_09_ma_beats_greedy() {
    let config = ExperimentConfig::for_setup(Setup::MultiAgent);
    assert_eq!(config.total_steps, 500_000);
    assert_eq!(config.seed_mode(), SeedMode::Fixed(0));
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = run::train(
        &config,
        dir.path(),
        &TrainOptions {
            quiet: true,
            ..TrainOptions::default()
        },
    )
    .unwrap();
    let train_secs = started.elapsed().as_secs_f64();
    let (policy, _) = Policy::from_checkpoint(out.last_checkpoint.as_ref().unwrap()).unwrap();
    let Policy::Learned { learner, .. } = &policy else {
        unreachable!()
    };
    let spec = fixed_spec(&config);
    let ma = evaluate(&mut PolicyController::new(learner, Setup::MultiAgent.layout(), TOWER_COUNT), &spec).unwrap();
    let greedy = evaluate(&mut GreedyController, &spec).unwrap();
    assert_eq!(ma.episodes.len(), 20);
    assert!(ma.reward.mean.is_finite() && greedy.reward.mean > 0.0);
    let ratio = ma.reward.mean / greedy.reward.mean;
    let pass = ratio >= 2.0;
    verdict(
        9,
        "multi-agent vs greedy (seed 0, difficulty 1, 5e5 steps, 20 episodes)",
        pass,
        &format!(
            "MA {:.3} ± {:.3}, greedy {:.3} ± {:.3}, ratio {ratio:.3} (needs >= 2); performance MA {:.4} greedy {:.4}; \
             help responses/episode {:.1}; trained in {train_secs:.0} s",
            ma.reward.mean,
            ma.reward.std,
            greedy.reward.mean,
            greedy.reward.std,
            ma.performance.mean,
            greedy.performance.mean,
            ma.episodes.iter().map(|m| m.help_count as f64).sum::<f64>() / 20.0,
        ),
    );
}

// 10 ------------------------------------------------------------------------

#[test]
#[ignore = "slow: two 5e5-step training runs"]
fn criterion_10_random_seed_curriculum_generalises() {
    let opts = TrainOptions {
        quiet: true,
        ..TrainOptions::default()
    };
    let mut results = Vec::new();
    for setup in [Setup::MultiAgentAc, Setup::MultiAgent] {
        let config = ExperimentConfig::for_setup(setup);
        let dir = tempfile::tempdir().unwrap();
        let out = run::train(&config, dir.path(), &opts).unwrap();
        let (policy, _) = Policy::from_checkpoint(out.last_checkpoint.as_ref().unwrap()).unwrap();
        let plan = EvalPlan {
            episodes: 20,
            ..EvalPlan::from_config(&config)
        };
        results.push(run::evaluate_policy(&policy, &plan).unwrap().random);
    }
    let (ac, fixed) = (&results[0], &results[1]);
    let pooled_se = (ac.reward.std.powi(2) / 20.0 + fixed.reward.std.powi(2) / 20.0).sqrt();
    let gap = fixed.reward.mean - ac.reward.mean;
    let pass = gap <= 0.0 || gap <= pooled_se;
    verdict(
        10,
        "random-seed curriculum vs fixed-seed on 20 held-out seeds",
        pass,
        &format!(
            "AC {:.3} ± {:.3}, fixed-seed {:.3} ± {:.3}, gap {gap:.3}, pooled SE {pooled_se:.3}",
            ac.reward.mean, ac.reward.std, fixed.reward.mean, fixed.reward.std
        ),
    );
}
