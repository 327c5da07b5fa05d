//! Intrinsic curiosity: a feature encoder trained through an inverse
//! dynamics model, and a forward model whose prediction error is the
//! exploration bonus.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ppo::CuriosityConfig;
use crate::nn::{cast, log_softmax, relu, relu_backward, Adam, Dense, LayoutBuilder, Scalar};

/// Weight of the forward loss; the inverse loss gets the remainder.
pub const FORWARD_LOSS_WEIGHT: f64 = 0.2;

/// `strength * |prediction - actual|^2 / 2`.
pub fn intrinsic_reward<T: Scalar>(prediction: &[T], actual: &[T], strength: f64) -> f64 {
    let sq: f64 = prediction
        .iter()
        .zip(actual)
        .map(|(p, a)| {
            let d = (*p - *a).to_f64().unwrap_or(f64::NAN);
            d * d
        })
        .sum();
    strength * 0.5 * sq
}

/// Two dense layers, ReLU after each unless `linear_out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct TwoLayer {
    a: Dense,
    b: Dense,
    linear_out: bool,
}

#[derive(Debug, Clone, Default)]
struct TwoLayerCache<T> {
    rows: usize,
    x: Vec<T>,
    h: Vec<T>,
    y: Vec<T>,
}

impl TwoLayer {
    fn new(lb: &mut LayoutBuilder, inputs: usize, hidden: usize, outputs: usize, linear_out: bool) -> Self {
        Self {
            a: lb.dense(inputs, hidden),
            b: lb.dense(hidden, outputs),
            linear_out,
        }
    }

    fn init<T: Scalar>(&self, p: &mut [T], rng: &mut impl rand::Rng) {
        self.a.init_orthogonal(p, core::f64::consts::SQRT_2, rng);
        let gain = if self.linear_out { 1.0 } else { core::f64::consts::SQRT_2 };
        self.b.init_orthogonal(p, gain, rng);
    }

    fn forward<T: Scalar>(&self, p: &[T], x: Vec<T>, rows: usize, c: &mut TwoLayerCache<T>) {
        c.rows = rows;
        c.x = x;
        c.h = vec![T::zero(); rows * self.a.outputs];
        self.a.forward(p, &c.x, rows, &mut c.h);
        relu(&mut c.h);
        c.y = vec![T::zero(); rows * self.b.outputs];
        self.b.forward(p, &c.h, rows, &mut c.y);
        if !self.linear_out {
            relu(&mut c.y);
        }
    }

    fn backward<T: Scalar>(&self, p: &[T], c: &TwoLayerCache<T>, dy: &[T], g: &mut [T], want_dx: bool) -> Vec<T> {
        let mut dy = dy.to_vec();
        if !self.linear_out {
            relu_backward(&c.y, &mut dy);
        }
        let mut dh = vec![T::zero(); c.rows * self.a.outputs];
        self.b.backward(p, &c.h, &dy, c.rows, g, Some(&mut dh));
        relu_backward(&c.h, &mut dh);
        if want_dx {
            let mut dx = vec![T::zero(); c.rows * self.a.inputs];
            self.a.backward(p, &c.x, &dh, c.rows, g, Some(&mut dx));
            dx
        } else {
            self.a.backward(p, &c.x, &dh, c.rows, g, None);
            Vec::new()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IcmModel {
    pub obs_width: usize,
    pub branches: Vec<usize>,
    pub encoding: usize,
    encoder: TwoLayer,
    forward_model: TwoLayer,
    inverse_model: TwoLayer,
    pub param_len: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IcmLoss {
    pub forward: f64,
    pub inverse: f64,
}

impl IcmLoss {
    pub fn total(&self) -> f64 {
        FORWARD_LOSS_WEIGHT * self.forward + (1.0 - FORWARD_LOSS_WEIGHT) * self.inverse
    }
}

impl IcmModel {
    pub fn new(obs_width: usize, branches: Vec<usize>, encoding: usize) -> Self {
        let actions: usize = branches.iter().sum();
        let mut lb = LayoutBuilder::new();
        let encoder = TwoLayer::new(&mut lb, obs_width, encoding, encoding, false);
        let forward_model = TwoLayer::new(&mut lb, encoding + actions, encoding, encoding, true);
        let inverse_model = TwoLayer::new(&mut lb, 2 * encoding, encoding, actions, true);
        Self {
            obs_width,
            branches,
            encoding,
            encoder,
            forward_model,
            inverse_model,
            param_len: lb.len(),
        }
    }

    fn action_width(&self) -> usize {
        self.branches.iter().sum()
    }

    pub fn init<T: Scalar>(&self, rng: &mut impl rand::Rng) -> Vec<T> {
        let mut p = vec![T::zero(); self.param_len];
        self.encoder.init(&mut p, rng);
        self.forward_model.init(&mut p, rng);
        self.inverse_model.init(&mut p, rng);
        p
    }

    fn one_hot<T: Scalar>(&self, actions: &[usize], row: usize, out: &mut Vec<T>) {
        let n = self.branches.len();
        let mut start = 0;
        for (b, &k) in self.branches.iter().enumerate() {
            for j in 0..k {
                out.push(if actions[row * n + b] == j { T::one() } else { T::zero() });
            }
            start += k;
        }
        debug_assert_eq!(start, self.action_width());
    }

    fn encode<T: Scalar>(&self, p: &[T], obs: &[T], rows: usize) -> TwoLayerCache<T> {
        let mut c = TwoLayerCache::default();
        self.encoder
            .forward(p, obs[..rows * self.obs_width].to_vec(), rows, &mut c);
        c
    }

    fn predict<T: Scalar>(&self, p: &[T], phi: &[T], actions: &[usize], rows: usize) -> TwoLayerCache<T> {
        let e = self.encoding;
        let mut x = Vec::with_capacity(rows * (e + self.action_width()));
        for r in 0..rows {
            x.extend_from_slice(&phi[r * e..(r + 1) * e]);
            self.one_hot(actions, r, &mut x);
        }
        let mut c = TwoLayerCache::default();
        self.forward_model.forward(p, x, rows, &mut c);
        c
    }

    /// Predicted next-state features of one transition.
    pub fn predict_next<T: Scalar>(&self, p: &[T], obs: &[T], actions: &[usize]) -> (Vec<T>, Vec<T>) {
        let phi = self.encode(p, obs, 1);
        let pred = self.predict(p, &phi.y, actions, 1);
        (pred.y, phi.y)
    }

    /// Intrinsic reward of each of `rows` transitions.
    pub fn intrinsic_rewards<T: Scalar>(
        &self,
        p: &[T],
        obs: &[T],
        actions: &[usize],
        next_obs: &[T],
        rows: usize,
        strength: f64,
    ) -> Vec<f64> {
        if rows == 0 {
            return Vec::new();
        }
        let e = self.encoding;
        let phi = self.encode(p, obs, rows);
        let phi_next = self.encode(p, next_obs, rows);
        let pred = self.predict(p, &phi.y, actions, rows);
        (0..rows)
            .map(|r| intrinsic_reward(&pred.y[r * e..(r + 1) * e], &phi_next.y[r * e..(r + 1) * e], strength))
            .collect()
    }

    /// Loss terms averaged over rows, with the gradient of the weighted
    /// total accumulated into `grads`. The forward loss trains only the
    /// forward model; the encoder learns through the inverse model.
    pub fn loss_and_grad<T: Scalar>(
        &self,
        p: &[T],
        obs: &[T],
        actions: &[usize],
        next_obs: &[T],
        rows: usize,
        grads: &mut [T],
    ) -> IcmLoss {
        let e = self.encoding;
        let aw = self.action_width();
        let inv_rows = 1.0 / rows as f64;
        let phi = self.encode(p, obs, rows);
        let phi_next = self.encode(p, next_obs, rows);
        let pred = self.predict(p, &phi.y, actions, rows);

        let mut loss = IcmLoss::default();
        let w_fwd = FORWARD_LOSS_WEIGHT * inv_rows;
        let mut d_pred = vec![T::zero(); rows * e];
        for i in 0..rows * e {
            let d = pred.y[i] - phi_next.y[i];
            let df = d.to_f64().unwrap_or(f64::NAN);
            loss.forward += 0.5 * df * df * inv_rows;
            d_pred[i] = d * cast(w_fwd);
        }
        self.forward_model.backward(p, &pred, &d_pred, grads, false);

        let mut x = Vec::with_capacity(rows * 2 * e);
        for r in 0..rows {
            x.extend_from_slice(&phi.y[r * e..(r + 1) * e]);
            x.extend_from_slice(&phi_next.y[r * e..(r + 1) * e]);
        }
        let mut inv = TwoLayerCache::default();
        self.inverse_model.forward(p, x, rows, &mut inv);
        let w_inv = (1.0 - FORWARD_LOSS_WEIGHT) * inv_rows;
        let mut d_logits = vec![T::zero(); rows * aw];
        let mut lp = vec![T::zero(); aw];
        let n = self.branches.len();
        for r in 0..rows {
            let mut start = 0;
            for (b, &k) in self.branches.iter().enumerate() {
                let logits = &inv.y[r * aw + start..r * aw + start + k];
                log_softmax(logits, &mut lp[..k]);
                let a = actions[r * n + b];
                loss.inverse -= lp[a].to_f64().unwrap_or(f64::NAN) * inv_rows;
                for j in 0..k {
                    let prob = lp[j].exp();
                    let target = if j == a { T::one() } else { T::zero() };
                    d_logits[r * aw + start + j] = (prob - target) * cast(w_inv);
                }
                start += k;
            }
        }
        let d_x = self.inverse_model.backward(p, &inv, &d_logits, grads, true);
        let mut d_phi = vec![T::zero(); rows * e];
        let mut d_phi_next = vec![T::zero(); rows * e];
        for r in 0..rows {
            d_phi[r * e..(r + 1) * e].copy_from_slice(&d_x[r * 2 * e..r * 2 * e + e]);
            d_phi_next[r * e..(r + 1) * e].copy_from_slice(&d_x[r * 2 * e + e..(r + 1) * 2 * e]);
        }
        self.encoder.backward(p, &phi, &d_phi, grads, false);
        self.encoder.backward(p, &phi_next, &d_phi_next, grads, false);
        loss
    }
}

/// Curiosity model with its own parameters and optimiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curiosity {
    pub config: CuriosityConfig,
    pub model: IcmModel,
    pub params: Vec<f32>,
    pub optimizer: Adam<f32>,
}

impl Curiosity {
    pub fn new(config: CuriosityConfig, obs_width: usize, branches: Vec<usize>, rng: &mut impl rand::Rng) -> Self {
        let model = IcmModel::new(obs_width, branches, config.encoding_size);
        let params = model.init(rng);
        let optimizer = Adam::new(model.param_len);
        Self {
            config,
            model,
            params,
            optimizer,
        }
    }

    pub fn rewards(&self, obs: &[f32], actions: &[usize], next_obs: &[f32], rows: usize) -> Vec<f64> {
        self.model
            .intrinsic_rewards(&self.params, obs, actions, next_obs, rows, self.config.strength)
    }
}
