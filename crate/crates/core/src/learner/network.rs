//! Actor-critic network: optional graph encoder, a ReLU trunk and separate
//! policy and value heads on a shared parameter vector.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::comms::encoder::{EncoderCache, GraphEncoder, EMBEDDING_WIDTH};
use crate::nn::{relu, relu_backward, Dense, LayoutBuilder, Scalar};
use crate::policies::{FRAME_MA, STACK};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub inputs: usize,
    pub branches: Vec<usize>,
    pub hidden_units: usize,
    pub num_layers: usize,
    /// Route each stacked frame through the message-passing encoder first.
    pub graph_encoder: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyNetwork {
    pub spec: NetworkSpec,
    pub encoder: Option<GraphEncoder>,
    pub trunk: Vec<Dense>,
    pub policy: Dense,
    pub value: Dense,
    pub param_len: usize,
}

/// Activations of one forward pass.
#[derive(Debug, Default, Clone)]
pub struct ForwardCache<T> {
    pub batch: usize,
    input: Vec<T>,
    encoder: EncoderCache<T>,
    hidden: Vec<Vec<T>>,
    pub logits: Vec<T>,
    pub values: Vec<T>,
}

impl PolicyNetwork {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        if spec.branches.is_empty() || spec.branches.contains(&0) {
            return Err(Error::Config("every action branch needs at least one action".into()));
        }
        if spec.hidden_units == 0 || spec.num_layers == 0 {
            return Err(Error::Config("trunk needs positive width and depth".into()));
        }
        let mut lb = LayoutBuilder::new();
        let (encoder, trunk_in) = if spec.graph_encoder {
            if spec.inputs != FRAME_MA * STACK {
                return Err(Error::DimensionMismatch {
                    what: "encoder input",
                    expected: FRAME_MA * STACK,
                    found: spec.inputs,
                });
            }
            (Some(GraphEncoder::new(&mut lb)), EMBEDDING_WIDTH * STACK)
        } else {
            (None, spec.inputs)
        };
        let mut trunk = Vec::with_capacity(spec.num_layers);
        let mut width = trunk_in;
        for _ in 0..spec.num_layers {
            trunk.push(lb.dense(width, spec.hidden_units));
            width = spec.hidden_units;
        }
        let policy = lb.dense(width, spec.branches.iter().sum());
        let value = lb.dense(width, 1);
        Ok(Self {
            spec,
            encoder,
            trunk,
            policy,
            value,
            param_len: lb.len(),
        })
    }

    pub fn action_width(&self) -> usize {
        self.policy.outputs
    }

    pub fn init<T: Scalar>(&self, rng: &mut impl rand::Rng) -> Vec<T> {
        let mut p = vec![T::zero(); self.param_len];
        if let Some(enc) = &self.encoder {
            enc.init(&mut p, rng);
        }
        for d in &self.trunk {
            d.init_orthogonal(&mut p, core::f64::consts::SQRT_2, rng);
        }
        self.policy.init_orthogonal(&mut p, 0.01, rng);
        self.value.init_orthogonal(&mut p, 1.0, rng);
        p
    }

    /// Runs `batch` observation rows; logits and values end up in the cache.
    pub fn forward<T: Scalar>(&self, params: &[T], obs: &[T], batch: usize, cache: &mut ForwardCache<T>) {
        cache.batch = batch;
        let rows_in = self.spec.inputs;
        cache.input.clear();
        cache.input.extend_from_slice(&obs[..batch * rows_in]);
        let mut x: Vec<T> = match &self.encoder {
            Some(enc) => {
                let frames = batch * STACK;
                let mut out = vec![T::zero(); frames * EMBEDDING_WIDTH];
                enc.forward(params, &cache.input, frames, &mut cache.encoder, &mut out);
                out
            }
            None => cache.input.clone(),
        };
        cache.hidden.resize_with(self.trunk.len(), Vec::new);
        for (d, h) in self.trunk.iter().zip(cache.hidden.iter_mut()) {
            h.clear();
            h.resize(batch * d.outputs, T::zero());
            d.forward(params, &x, batch, h);
            relu(h);
            x.clone_from(h);
        }
        let last = cache.hidden.last().map_or(&x, |h| h);
        cache.logits.clear();
        cache.logits.resize(batch * self.policy.outputs, T::zero());
        self.policy.forward(params, last, batch, &mut cache.logits);
        cache.values.clear();
        cache.values.resize(batch, T::zero());
        self.value.forward(params, last, batch, &mut cache.values);
    }

    /// Accumulates parameter gradients for upstream gradients on the logits
    /// and the values of the last forward pass.
    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        cache: &ForwardCache<T>,
        d_logits: &[T],
        d_values: &[T],
        grads: &mut [T],
    ) {
        let batch = cache.batch;
        let layers = self.trunk.len();
        let last = &cache.hidden[layers - 1];
        let mut d_h = vec![T::zero(); batch * self.spec.hidden_units];
        self.policy
            .backward(params, last, d_logits, batch, grads, Some(&mut d_h));
        let mut d_hv = vec![T::zero(); batch * self.spec.hidden_units];
        self.value
            .backward(params, last, d_values, batch, grads, Some(&mut d_hv));
        for (a, b) in d_h.iter_mut().zip(&d_hv) {
            *a = *a + *b;
        }
        for l in (0..layers).rev() {
            relu_backward(&cache.hidden[l], &mut d_h);
            let d = &self.trunk[l];
            let need_dx = l > 0 || self.encoder.is_some();
            let mut dx = if need_dx {
                vec![T::zero(); batch * d.inputs]
            } else {
                Vec::new()
            };
            if l > 0 {
                d.backward(params, &cache.hidden[l - 1], &d_h, batch, grads, Some(&mut dx));
            } else if let Some(enc) = &self.encoder {
                let x = cache.encoder.output();
                d.backward(params, x, &d_h, batch, grads, Some(&mut dx));
                enc.backward(params, &cache.encoder, &dx, grads);
            } else {
                d.backward(params, &cache.input, &d_h, batch, grads, None);
            }
            d_h = dx;
        }
    }
}
