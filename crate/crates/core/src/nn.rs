//! Dense layers over a flat parameter vector, with hand-written backward
//! passes, Adam and gradient clipping.
//!
//! A network is a set of [`Dense`] views into one `Vec<T>`; gradients live in
//! a vector of the same length. Weights are stored input-major
//! (`w[i * outputs + o]`) so the forward pass is a sequence of axpy updates.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub trait Scalar: Float + Default + core::fmt::Debug + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
pub(crate) fn cast<T: Scalar>(v: f64) -> T {
    T::from(v).unwrap_or_else(T::nan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

/// Hands out consecutive parameter ranges.
#[derive(Debug, Default, Clone)]
pub struct LayoutBuilder {
    len: usize,
}

impl LayoutBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dense(&mut self, inputs: usize, outputs: usize) -> Dense {
        let d = Dense {
            inputs,
            outputs,
            offset: self.len,
        };
        self.len += d.param_len();
        d
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl Dense {
    pub fn param_len(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }

    fn weights<'a, T>(&self, params: &'a [T]) -> &'a [T] {
        &params[self.offset..self.offset + self.inputs * self.outputs]
    }

    fn bias<'a, T>(&self, params: &'a [T]) -> &'a [T] {
        let start = self.offset + self.inputs * self.outputs;
        &params[start..start + self.outputs]
    }

    /// `y = x W + b` for `batch` rows.
    pub fn forward<T: Scalar>(&self, params: &[T], x: &[T], batch: usize, y: &mut [T]) {
        let (n_in, n_out) = (self.inputs, self.outputs);
        debug_assert!(x.len() >= batch * n_in && y.len() >= batch * n_out);
        let w = self.weights(params);
        let b = self.bias(params);
        for r in 0..batch {
            let yr = &mut y[r * n_out..(r + 1) * n_out];
            yr.copy_from_slice(b);
            let xr = &x[r * n_in..(r + 1) * n_in];
            for (i, &xi) in xr.iter().enumerate() {
                if xi == T::zero() {
                    continue;
                }
                let wr = &w[i * n_out..(i + 1) * n_out];
                for (yo, &wo) in yr.iter_mut().zip(wr) {
                    *yo = *yo + xi * wo;
                }
            }
        }
    }

    /// Accumulates parameter gradients into `grads` (full-length vector) and,
    /// when `dx` is given, writes the input gradient.
    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        x: &[T],
        dy: &[T],
        batch: usize,
        grads: &mut [T],
        dx: Option<&mut [T]>,
    ) {
        let (n_in, n_out) = (self.inputs, self.outputs);
        let w_start = self.offset;
        {
            let (gw, rest) = grads[w_start..].split_at_mut(n_in * n_out);
            let gb = &mut rest[..n_out];
            for r in 0..batch {
                let dyr = &dy[r * n_out..(r + 1) * n_out];
                for (g, &d) in gb.iter_mut().zip(dyr) {
                    *g = *g + d;
                }
                let xr = &x[r * n_in..(r + 1) * n_in];
                for (i, &xi) in xr.iter().enumerate() {
                    if xi == T::zero() {
                        continue;
                    }
                    let gr = &mut gw[i * n_out..(i + 1) * n_out];
                    for (g, &d) in gr.iter_mut().zip(dyr) {
                        *g = *g + xi * d;
                    }
                }
            }
        }
        if let Some(dx) = dx {
            let w = self.weights(params);
            for r in 0..batch {
                let dyr = &dy[r * n_out..(r + 1) * n_out];
                let dxr = &mut dx[r * n_in..(r + 1) * n_in];
                for (i, d) in dxr.iter_mut().enumerate() {
                    *d = dot(&w[i * n_out..(i + 1) * n_out], dyr);
                }
            }
        }
    }

    /// Orthogonal initialisation scaled by `gain`, zero bias.
    pub fn init_orthogonal<T: Scalar>(&self, params: &mut [T], gain: f64, rng: &mut impl rand::Rng) {
        let (n_in, n_out) = (self.inputs, self.outputs);
        let rows = n_in.max(n_out);
        let cols = n_in.min(n_out);
        // columns of a rows x cols gaussian matrix, orthonormalised in place
        let mut q: Vec<f64> = (0..rows * cols)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        for c in 0..cols {
            for p in 0..c {
                let mut proj = 0.0;
                for r in 0..rows {
                    proj += q[r * cols + c] * q[r * cols + p];
                }
                for r in 0..rows {
                    q[r * cols + c] -= proj * q[r * cols + p];
                }
            }
            let norm = libm::sqrt((0..rows).map(|r| q[r * cols + c] * q[r * cols + c]).sum::<f64>());
            let norm = if norm > 1e-12 { norm } else { 1.0 };
            for r in 0..rows {
                q[r * cols + c] /= norm;
            }
        }
        let w = &mut params[self.offset..self.offset + n_in * n_out];
        for i in 0..n_in {
            for o in 0..n_out {
                // W has shape out x in; take Q or its transpose to match
                let v = if n_out >= n_in { q[o * cols + i] } else { q[i * cols + o] };
                w[i * n_out + o] = cast(gain * v);
            }
        }
        let start = self.offset + n_in * n_out;
        for b in &mut params[start..start + n_out] {
            *b = T::zero();
        }
    }
}

/// Dot product with eight independent accumulators so the loop vectorises.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let mut acc = [T::zero(); 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let base = c * 8;
        for k in 0..8 {
            acc[k] = acc[k] + a[base + k] * b[base + k];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..n {
        tail = tail + a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub fn relu<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Zeroes `grad` where the rectified activation was not positive.
pub fn relu_backward<T: Scalar>(activated: &[T], grad: &mut [T]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Log-softmax of one row into `out`.
pub fn log_softmax<T: Scalar>(logits: &[T], out: &mut [T]) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum = logits.iter().fold(T::zero(), |s, &l| s + (l - max).exp());
    let lse = max + sum.ln();
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = l - lse;
    }
}

/// Global L2 norm of `grads`, rescaled in place to at most `max_norm`.
pub fn clip_grad_norm<T: Scalar>(grads: &mut [T], max_norm: f64) -> f64 {
    let sq: f64 = grads
        .iter()
        .map(|g| {
            let g = g.to_f64().unwrap_or(f64::NAN);
            g * g
        })
        .sum();
    let norm = libm::sqrt(sq);
    if norm > max_norm && norm.is_finite() {
        let scale: T = cast(max_norm / norm);
        for g in grads.iter_mut() {
            *g = *g * scale;
        }
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(len: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }

    /// One descent step on `params` along `grads`.
    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: f64) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - libm::pow(self.beta1, f64::from(t));
        let bc2 = 1.0 - libm::pow(self.beta2, f64::from(t));
        let b1: T = cast(self.beta1);
        let b2: T = cast(self.beta2);
        let one = T::one();
        let step: T = cast(lr / bc1);
        let inv_bc2_sqrt: T = cast(1.0 / libm::sqrt(bc2));
        let eps: T = cast(self.eps);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            *p = *p - step * *m / (v.sqrt() * inv_bc2_sqrt + eps);
        }
    }
}
