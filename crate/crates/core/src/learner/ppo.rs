//! PPO-Clip: the clipped surrogate, its gradient, the rollout buffer and the
//! minibatch update.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::network::{ForwardCache, PolicyNetwork};
use crate::nn::{cast, log_softmax, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CuriosityConfig {
    pub gamma: f64,
    pub strength: f64,
    pub encoding_size: usize,
    pub learning_rate: f64,
}

impl Default for CuriosityConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            strength: 0.02,
            encoding_size: 256,
            learning_rate: 3e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub batch_size: usize,
    pub buffer_size: usize,
    pub learning_rate: f64,
    /// Entropy coefficient.
    pub beta: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub num_epoch: usize,
    pub time_horizon: usize,
    pub hidden_units: usize,
    pub num_layers: usize,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    /// `None` disables the curiosity signal.
    pub curiosity: Option<CuriosityConfig>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            buffer_size: 2048,
            learning_rate: 3e-4,
            beta: 0.01,
            epsilon: 0.2,
            lambda: 0.95,
            gamma: 0.99,
            num_epoch: 3,
            time_horizon: 128,
            hidden_units: 512,
            num_layers: 2,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            curiosity: Some(CuriosityConfig::default()),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("gamma and lambda must lie in (0, 1]");
        }
        if self.batch_size == 0
            || self.buffer_size == 0
            || self.num_epoch == 0
            || self.time_horizon == 0
            || self.hidden_units == 0
            || self.num_layers == 0
        {
            return bad("PPO counts must be positive");
        }
        if !(self.learning_rate >= 0.0) || !(self.beta >= 0.0) {
            return bad("learning rate and entropy coefficient must be non-negative");
        }
        if let Some(c) = &self.curiosity {
            if c.encoding_size == 0 || !(c.strength >= 0.0) || !(c.learning_rate >= 0.0) {
                return bad("invalid curiosity settings");
            }
        }
        Ok(())
    }
}

/// Linear decay from `initial` at step 0 to zero at `max_steps`.
pub fn linear_lr(initial: f64, step: u64, max_steps: u64) -> f64 {
    if max_steps == 0 {
        return 0.0;
    }
    let frac = 1.0 - step as f64 / max_steps as f64;
    initial * frac.max(0.0)
}

/// `min(r A, g(eps, A))` with `g = (1 + eps) A` for `A >= 0`, `(1 - eps) A`
/// otherwise.
pub fn clip_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let g = if advantage >= 0.0 {
        (1.0 + epsilon) * advantage
    } else {
        (1.0 - epsilon) * advantage
    };
    (ratio * advantage).min(g)
}

/// Entropy of the categorical distribution with log-probabilities `log_p`.
pub fn entropy<T: Scalar>(log_p: &[T]) -> T {
    log_p
        .iter()
        .fold(T::zero(), |h, &lp| if lp.is_finite() { h - lp.exp() * lp } else { h })
}

/// One minibatch, rows aligned.
#[derive(Debug, Clone, Copy)]
pub struct Minibatch<'a, T> {
    pub obs: &'a [T],
    /// `rows * branches` chosen indices.
    pub actions: &'a [usize],
    pub old_log_prob: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

impl<T> Minibatch<'_, T> {
    pub fn rows(&self) -> usize {
        self.advantages.len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
}

/// Coefficients of the loss that is minimised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub epsilon: f64,
    pub beta: f64,
    pub value_coef: f64,
}

/// Minimised loss `-clip + c_v (V - R)^2 - beta H`, averaged over rows, and
/// its gradient accumulated into `grads`.
pub fn surrogate_loss<T: Scalar>(
    net: &PolicyNetwork,
    params: &[T],
    mb: &Minibatch<'_, T>,
    coef: &LossCoefficients,
    cache: &mut ForwardCache<T>,
    grads: &mut [T],
) -> LossTerms {
    let rows = mb.rows();
    let branches = &net.spec.branches;
    let width = net.action_width();
    net.forward(params, mb.obs, rows, cache);
    let inv = 1.0 / rows as f64;
    let mut d_logits = vec![T::zero(); rows * width];
    let mut d_values = vec![T::zero(); rows];
    let mut terms = LossTerms::default();
    let mut log_p = vec![T::zero(); width];
    for r in 0..rows {
        let logits = &cache.logits[r * width..(r + 1) * width];
        let mut lp_sum = 0.0;
        let mut ent = 0.0;
        let mut start = 0;
        for (b, &k) in branches.iter().enumerate() {
            log_softmax(&logits[start..start + k], &mut log_p[start..start + k]);
            let a = mb.actions[r * branches.len() + b];
            lp_sum += log_p[start + a].to_f64().unwrap_or(f64::NAN);
            ent += entropy(&log_p[start..start + k]).to_f64().unwrap_or(f64::NAN);
            start += k;
        }
        let ratio = libm::exp(lp_sum - mb.old_log_prob[r]);
        let adv = mb.advantages[r];
        let surrogate = clip_objective(ratio, adv, coef.epsilon);
        // gradient flows only through the unclipped branch of the min
        let unclipped = ratio * adv <= surrogate;
        if (ratio - 1.0).abs() > coef.epsilon {
            terms.clip_fraction += inv;
        }
        terms.mean_ratio += ratio * inv;
        terms.policy -= surrogate * inv;
        terms.entropy += ent * inv;
        let d_lp = if unclipped { -ratio * adv * inv } else { 0.0 };
        let mut start = 0;
        for (b, &k) in branches.iter().enumerate() {
            let a = mb.actions[r * branches.len() + b];
            let lp = &log_p[start..start + k];
            let h = entropy(lp).to_f64().unwrap_or(f64::NAN);
            for j in 0..k {
                let l = lp[j].to_f64().unwrap_or(f64::NAN);
                let p = libm::exp(l);
                let onehot = if j == a { 1.0 } else { 0.0 };
                // d(-beta H)/dz_j = beta p_j (log p_j + H)
                let g = d_lp * (onehot - p) + coef.beta * inv * p * (l + h);
                d_logits[r * width + start + j] = cast(g);
            }
            start += k;
        }
        let v = cache.values[r].to_f64().unwrap_or(f64::NAN);
        let err = v - mb.returns[r];
        terms.value += err * err * inv;
        d_values[r] = cast(2.0 * coef.value_coef * err * inv);
    }
    terms.total = terms.policy + coef.value_coef * terms.value - coef.beta * terms.entropy;
    net.backward(params, cache, &d_logits, &d_values, grads);
    terms
}

/// Flattened transitions ready for an update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutBuffer {
    pub obs_width: usize,
    pub branches: usize,
    pub obs: Vec<f32>,
    pub next_obs: Vec<f32>,
    pub actions: Vec<usize>,
    pub log_prob: Vec<f64>,
    pub values: Vec<f64>,
    pub extrinsic: Vec<f64>,
    pub intrinsic: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(obs_width: usize, branches: usize) -> Self {
        Self {
            obs_width,
            branches,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.advantages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advantages.is_empty()
    }

    pub fn clear(&mut self) {
        let (w, b) = (self.obs_width, self.branches);
        *self = Self::new(w, b);
    }

    /// Checks that every column has one entry per row and that the
    /// recorded log-probabilities are valid.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let cols = [
            ("buffer observations", self.obs.len(), n * self.obs_width),
            ("buffer next observations", self.next_obs.len(), n * self.obs_width),
            ("buffer actions", self.actions.len(), n * self.branches),
            ("buffer log-probabilities", self.log_prob.len(), n),
            ("buffer values", self.values.len(), n),
            ("buffer extrinsic rewards", self.extrinsic.len(), n),
            ("buffer intrinsic rewards", self.intrinsic.len(), n),
            ("buffer returns", self.returns.len(), n),
        ];
        for (what, found, expected) in cols {
            if found != expected {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        if self.log_prob.iter().any(|&l| !(l.is_finite() && l <= 0.0)) {
            return Err(Error::NonFinite("buffer log-probabilities"));
        }
        Ok(())
    }

    /// Advantages shifted and scaled to mean 0, standard deviation 1.
    pub fn normalized_advantages(&self) -> Vec<f64> {
        let n = self.len() as f64;
        if n == 0.0 {
            return Vec::new();
        }
        let mean = self.advantages.iter().sum::<f64>() / n;
        let var = self.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        let std = libm::sqrt(var);
        self.advantages.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub samples: usize,
    pub minibatches: usize,
    pub learning_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub curiosity_forward_loss: f64,
    pub curiosity_inverse_loss: f64,
}
