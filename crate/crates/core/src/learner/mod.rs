//! PPO-Clip learner with GAE and an optional curiosity bonus.
//!
//! The harness feeds per-agent [`Trajectory`] segments into a
//! [`RolloutBuffer`]; once the buffer holds `buffer_size` samples
//! [`Learner::update`] runs `num_epoch` passes of shuffled minibatches.

pub mod gae;
pub mod icm;
pub mod network;
pub mod ppo;

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use gae::compute_gae;
pub use icm::{Curiosity, IcmModel};
pub use network::{ForwardCache, NetworkSpec, PolicyNetwork};
pub use ppo::{
    clip_objective, entropy, linear_lr, surrogate_loss, CuriosityConfig, LossCoefficients, LossTerms,
    Minibatch, PpoConfig, RolloutBuffer, UpdateStats,
};

use crate::nn::{clip_grad_norm, log_softmax, Adam};
use crate::policies::sample_categorical;
use crate::rng::{self, tag, Rng};
use crate::{Error, Result};

/// Action drawn for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActSample {
    /// One index per action branch.
    pub actions: Vec<usize>,
    pub log_prob: f64,
    pub value: f64,
}

/// Consecutive steps of one agent within one episode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub obs: Vec<f32>,
    pub next_obs: Vec<f32>,
    pub actions: Vec<usize>,
    pub log_prob: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Episode terminated after this step.
    pub dones: Vec<bool>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, obs: &[f32], sample: &ActSample, reward: f64, done: bool) {
        self.obs.extend_from_slice(obs);
        self.actions.extend_from_slice(&sample.actions);
        self.log_prob.push(sample.log_prob);
        self.values.push(sample.value);
        self.rewards.push(reward);
        self.dones.push(done);
    }

    /// Records the observation that followed the latest step.
    pub fn push_next_obs(&mut self, obs: &[f32]) {
        self.next_obs.extend_from_slice(obs);
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub config: PpoConfig,
    pub network: PolicyNetwork,
    pub params: Vec<f32>,
    pub optimizer: Adam<f32>,
    pub curiosity: Option<Curiosity>,
    pub updates: u64,
}

impl Learner {
    /// Fresh learner with orthogonally initialised weights drawn from
    /// `seed`.
    pub fn new(config: PpoConfig, inputs: usize, branches: Vec<usize>, graph_encoder: bool, seed: u64) -> Result<Self> {
        config.validate()?;
        let network = PolicyNetwork::new(NetworkSpec {
            inputs,
            branches: branches.clone(),
            hidden_units: config.hidden_units,
            num_layers: config.num_layers,
            graph_encoder,
        })?;
        let mut init = rng::derived_stream(seed, tag::INIT, 0);
        let params = network.init(&mut init);
        let optimizer = Adam::new(network.param_len);
        let curiosity = config
            .curiosity
            .clone()
            .map(|c| Curiosity::new(c, inputs, branches, &mut init));
        Ok(Self {
            config,
            network,
            params,
            optimizer,
            curiosity,
            updates: 0,
        })
    }

    pub fn inputs(&self) -> usize {
        self.network.spec.inputs
    }

    pub fn branches(&self) -> &[usize] {
        &self.network.spec.branches
    }

    /// Samples one action per branch for each of `rows` observations.
    pub fn act(&self, obs: &[f32], rows: usize, rng: &mut Rng, cache: &mut ForwardCache<f32>) -> Result<Vec<ActSample>> {
        self.check_rows(obs, rows)?;
        self.network.forward(&self.params, obs, rows, cache);
        let width = self.network.action_width();
        let mut lp = vec![0.0f32; width];
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let logits = &cache.logits[r * width..(r + 1) * width];
            if logits.iter().any(|l| !l.is_finite()) || !cache.values[r].is_finite() {
                return Err(Error::NonFinite("policy logits"));
            }
            let mut actions = Vec::with_capacity(self.branches().len());
            let mut log_prob = 0.0;
            let mut start = 0;
            for &k in self.branches() {
                log_softmax(&logits[start..start + k], &mut lp[start..start + k]);
                let a = sample_categorical(&lp[start..start + k], rng);
                log_prob += f64::from(lp[start + a]);
                actions.push(a);
                start += k;
            }
            out.push(ActSample {
                actions,
                log_prob,
                value: f64::from(cache.values[r]),
            });
        }
        Ok(out)
    }

    /// State values of `rows` observations.
    pub fn values(&self, obs: &[f32], rows: usize, cache: &mut ForwardCache<f32>) -> Result<Vec<f64>> {
        self.check_rows(obs, rows)?;
        self.network.forward(&self.params, obs, rows, cache);
        Ok(cache.values.iter().map(|&v| f64::from(v)).collect())
    }

    fn check_rows(&self, obs: &[f32], rows: usize) -> Result<()> {
        let expected = rows * self.inputs();
        if obs.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "policy observations",
                expected,
                found: obs.len(),
            });
        }
        Ok(())
    }

    /// Adds curiosity rewards, computes advantages and moves the segment
    /// into `buffer`. `bootstrap` is the value of the state after the last
    /// step.
    pub fn finish_trajectory(&self, traj: &Trajectory, bootstrap: f64, buffer: &mut RolloutBuffer) -> Result<()> {
        let n = traj.len();
        if n == 0 {
            return Ok(());
        }
        if traj.next_obs.len() != traj.obs.len() {
            return Err(Error::DimensionMismatch {
                what: "trajectory next observations",
                expected: traj.obs.len(),
                found: traj.next_obs.len(),
            });
        }
        let intrinsic = match &self.curiosity {
            Some(c) => c.rewards(&traj.obs, &traj.actions, &traj.next_obs, n),
            None => vec![0.0; n],
        };
        let total: Vec<f64> = traj.rewards.iter().zip(&intrinsic).map(|(e, i)| e + i).collect();
        let (adv, ret) = compute_gae(
            &total,
            &traj.values,
            &traj.dones,
            bootstrap,
            self.config.gamma,
            self.config.lambda,
        )?;
        buffer.obs.extend_from_slice(&traj.obs);
        buffer.next_obs.extend_from_slice(&traj.next_obs);
        buffer.actions.extend_from_slice(&traj.actions);
        buffer.log_prob.extend_from_slice(&traj.log_prob);
        buffer.values.extend_from_slice(&traj.values);
        buffer.extrinsic.extend_from_slice(&traj.rewards);
        buffer.intrinsic.extend(intrinsic);
        buffer.advantages.extend(adv);
        buffer.returns.extend(ret);
        Ok(())
    }

    /// `num_epoch` passes over shuffled minibatches of the buffer. On a
    /// non-finite loss or gradient the parameters are left as they were
    /// before the call.
    pub fn update(&mut self, buffer: &RolloutBuffer, learning_rate: f64, shuffle_seed: u64) -> Result<UpdateStats> {
        buffer.validate()?;
        let n = buffer.len();
        if n == 0 {
            return Err(Error::Config("update on an empty buffer".into()));
        }
        let advantages = if self.config.normalize_advantages {
            buffer.normalized_advantages()
        } else {
            buffer.advantages.clone()
        };
        let backup = (self.params.clone(), self.optimizer.clone(), self.curiosity.clone());
        let result = self.run_epochs(buffer, &advantages, learning_rate, shuffle_seed);
        if result.is_err() {
            self.params = backup.0;
            self.optimizer = backup.1;
            self.curiosity = backup.2;
        } else {
            self.updates += 1;
        }
        result
    }

    fn run_epochs(&mut self, buf: &RolloutBuffer, adv: &[f64], lr: f64, seed: u64) -> Result<UpdateStats> {
        let n = buf.len();
        let w = buf.obs_width;
        let nb = buf.branches;
        let batch = self.config.batch_size.min(n);
        let coef = LossCoefficients {
            epsilon: self.config.epsilon,
            beta: self.config.beta,
            value_coef: self.config.value_coef,
        };
        let lr_scale = if self.config.learning_rate > 0.0 {
            lr / self.config.learning_rate
        } else {
            0.0
        };
        let mut shuffle = rng::derived_stream(seed, tag::SHUFFLE, self.updates);
        let mut order: Vec<usize> = (0..n).collect();
        let mut cache = ForwardCache::default();
        let mut grads = vec![0.0f32; self.network.param_len];
        let mut icm_grads = Vec::new();
        let mut stats = UpdateStats {
            samples: n,
            learning_rate: lr,
            ..UpdateStats::default()
        };
        let (mut obs, mut next, mut act) = (Vec::new(), Vec::new(), Vec::new());
        let (mut old, mut a, mut ret) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..self.config.num_epoch {
            order.shuffle(&mut shuffle);
            for chunk in order.chunks_exact(batch) {
                obs.clear();
                next.clear();
                act.clear();
                old.clear();
                a.clear();
                ret.clear();
                for &i in chunk {
                    obs.extend_from_slice(&buf.obs[i * w..(i + 1) * w]);
                    next.extend_from_slice(&buf.next_obs[i * w..(i + 1) * w]);
                    act.extend_from_slice(&buf.actions[i * nb..(i + 1) * nb]);
                    old.push(buf.log_prob[i]);
                    a.push(adv[i]);
                    ret.push(buf.returns[i]);
                }
                let mb = Minibatch {
                    obs: &obs,
                    actions: &act,
                    old_log_prob: &old,
                    advantages: &a,
                    returns: &ret,
                };
                grads.fill(0.0);
                let terms = surrogate_loss(&self.network, &self.params, &mb, &coef, &mut cache, &mut grads);
                if !terms.total.is_finite() {
                    return Err(Error::NonFinite("ppo loss"));
                }
                let norm = clip_grad_norm(&mut grads, self.config.max_grad_norm);
                if !norm.is_finite() {
                    return Err(Error::NonFinite("ppo gradient"));
                }
                self.optimizer.step(&mut self.params, &grads, lr);
                stats.minibatches += 1;
                stats.policy_loss += terms.policy;
                stats.value_loss += terms.value;
                stats.entropy += terms.entropy;
                stats.mean_ratio += terms.mean_ratio;
                stats.clip_fraction += terms.clip_fraction;
                stats.grad_norm += norm;

                if let Some(c) = &mut self.curiosity {
                    icm_grads.clear();
                    icm_grads.resize(c.model.param_len, 0.0f32);
                    let loss = c
                        .model
                        .loss_and_grad(&c.params, &obs, &act, &next, chunk.len(), &mut icm_grads);
                    if !loss.total().is_finite() {
                        return Err(Error::NonFinite("curiosity loss"));
                    }
                    clip_grad_norm(&mut icm_grads, self.config.max_grad_norm);
                    c.optimizer
                        .step(&mut c.params, &icm_grads, c.config.learning_rate * lr_scale);
                    stats.curiosity_forward_loss += loss.forward;
                    stats.curiosity_inverse_loss += loss.inverse;
                }
            }
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("policy parameters"));
        }
        let m = stats.minibatches.max(1) as f64;
        stats.policy_loss /= m;
        stats.value_loss /= m;
        stats.entropy /= m;
        stats.mean_ratio /= m;
        stats.clip_fraction /= m;
        stats.grad_norm /= m;
        stats.curiosity_forward_loss /= m;
        stats.curiosity_inverse_loss /= m;
        Ok(stats)
    }
}
