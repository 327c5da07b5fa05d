//! One round of message passing over a tower's inbox.
//!
//! Each of the three neighbour messages goes through a shared edge transform
//! (affine + ReLU); the transformed messages are averaged and concatenated
//! with the tower's own features, then the node transform (affine + ReLU)
//! produces the embedding. Averaging makes the result independent of the
//! inbox order.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::nn::{cast, relu, relu_backward, Dense, LayoutBuilder, Scalar};
use crate::policies::{FRAME_MA, MESSAGES, MESSAGE_WIDTH};
use crate::{Error, Result};

pub const EDGE_HIDDEN: usize = 32;
pub const EMBEDDING_WIDTH: usize = 32;
/// Own local reading (7) + help flags (3) + reserve (1).
pub const OWN_WIDTH: usize = 11;

const OWN_LOCAL: core::ops::Range<usize> = 0..MESSAGE_WIDTH;
const MSG_START: usize = MESSAGE_WIDTH;
const TAIL_START: usize = MESSAGE_WIDTH * (1 + MESSAGES);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEncoder {
    pub edge: Dense,
    pub node: Dense,
}

/// Activations kept for the backward pass.
#[derive(Debug, Default, Clone)]
pub struct EncoderCache<T> {
    frames: usize,
    messages: Vec<T>,
    edge_out: Vec<T>,
    node_in: Vec<T>,
    node_out: Vec<T>,
}

impl<T> EncoderCache<T> {
    /// Embeddings produced by the last forward pass.
    pub fn output(&self) -> &[T] {
        &self.node_out
    }
}

impl GraphEncoder {
    pub fn new(layout: &mut LayoutBuilder) -> Self {
        let edge = layout.dense(MESSAGE_WIDTH, EDGE_HIDDEN);
        let node = layout.dense(EDGE_HIDDEN + OWN_WIDTH, EMBEDDING_WIDTH);
        Self { edge, node }
    }

    pub fn init<T: Scalar>(&self, params: &mut [T], rng: &mut impl rand::Rng) {
        let gain = core::f64::consts::SQRT_2;
        self.edge.init_orthogonal(params, gain, rng);
        self.node.init_orthogonal(params, gain, rng);
    }

    /// Encodes `frames` consecutive 32-wide frames into `out`
    /// (`frames * EMBEDDING_WIDTH`).
    pub fn forward<T: Scalar>(
        &self,
        params: &[T],
        input: &[T],
        frames: usize,
        cache: &mut EncoderCache<T>,
        out: &mut [T],
    ) {
        cache.frames = frames;
        cache.messages.clear();
        cache.node_in.clear();
        for f in 0..frames {
            let frame = &input[f * FRAME_MA..(f + 1) * FRAME_MA];
            cache
                .messages
                .extend_from_slice(&frame[MSG_START..MSG_START + MESSAGES * MESSAGE_WIDTH]);
        }
        let rows = frames * MESSAGES;
        cache.edge_out.resize(rows * EDGE_HIDDEN, T::zero());
        self.edge
            .forward(params, &cache.messages, rows, &mut cache.edge_out);
        relu(&mut cache.edge_out);

        let inv: T = cast(1.0 / MESSAGES as f64);
        cache.node_in.resize(frames * (EDGE_HIDDEN + OWN_WIDTH), T::zero());
        for f in 0..frames {
            let row = &mut cache.node_in[f * (EDGE_HIDDEN + OWN_WIDTH)..(f + 1) * (EDGE_HIDDEN + OWN_WIDTH)];
            for h in 0..EDGE_HIDDEN {
                let mut s = T::zero();
                for m in 0..MESSAGES {
                    s = s + cache.edge_out[(f * MESSAGES + m) * EDGE_HIDDEN + h];
                }
                row[h] = s * inv;
            }
            let frame = &input[f * FRAME_MA..(f + 1) * FRAME_MA];
            row[EDGE_HIDDEN..EDGE_HIDDEN + MESSAGE_WIDTH].copy_from_slice(&frame[OWN_LOCAL]);
            row[EDGE_HIDDEN + MESSAGE_WIDTH..].copy_from_slice(&frame[TAIL_START..FRAME_MA]);
        }
        cache.node_out.resize(frames * EMBEDDING_WIDTH, T::zero());
        self.node
            .forward(params, &cache.node_in, frames, &mut cache.node_out);
        relu(&mut cache.node_out);
        out[..frames * EMBEDDING_WIDTH].copy_from_slice(&cache.node_out);
    }

    /// Accumulates parameter gradients given `d_out`.
    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        cache: &EncoderCache<T>,
        d_out: &[T],
        grads: &mut [T],
    ) {
        let frames = cache.frames;
        let mut d_node = d_out[..frames * EMBEDDING_WIDTH].to_vec();
        relu_backward(&cache.node_out, &mut d_node);
        let mut d_node_in = vec![T::zero(); frames * (EDGE_HIDDEN + OWN_WIDTH)];
        self.node.backward(
            params,
            &cache.node_in,
            &d_node,
            frames,
            grads,
            Some(&mut d_node_in),
        );
        let inv: T = cast(1.0 / MESSAGES as f64);
        let rows = frames * MESSAGES;
        let mut d_edge = vec![T::zero(); rows * EDGE_HIDDEN];
        for f in 0..frames {
            for m in 0..MESSAGES {
                for h in 0..EDGE_HIDDEN {
                    d_edge[(f * MESSAGES + m) * EDGE_HIDDEN + h] =
                        d_node_in[f * (EDGE_HIDDEN + OWN_WIDTH) + h] * inv;
                }
            }
        }
        relu_backward(&cache.edge_out, &mut d_edge);
        self.edge
            .backward(params, &cache.messages, &d_edge, rows, grads, None);
    }

    /// Single-frame convenience wrapper around [`forward`](Self::forward).
    pub fn encode<T: Scalar>(&self, params: &[T], frame: &[T]) -> Vec<T> {
        let mut cache = EncoderCache::default();
        let mut out = vec![T::zero(); EMBEDDING_WIDTH];
        self.forward(params, frame, 1, &mut cache, &mut out);
        out
    }
}

/// Embeds one tower's view: its own normalised reading, the three inbox
/// messages, the help-request flags and its reserve.
pub fn gnn_encode<T: Scalar>(
    encoder: &GraphEncoder,
    params: &[T],
    local: &[T],
    messages: &[&[T]],
    help_flags: &[T],
    own_reserve: T,
) -> Result<Vec<T>> {
    let check = |what, expected, found| {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what,
                expected,
                found,
            })
        }
    };
    check("local observation", MESSAGE_WIDTH, local.len())?;
    check("broadcast inbox", MESSAGES, messages.len())?;
    for m in messages {
        check("broadcast message", MESSAGE_WIDTH, m.len())?;
    }
    check("help flags", MESSAGES, help_flags.len())?;
    let layout_end = encoder.node.offset + encoder.node.param_len();
    if params.len() < layout_end {
        return Err(Error::DimensionMismatch {
            what: "encoder parameters",
            expected: layout_end,
            found: params.len(),
        });
    }
    let mut frame = Vec::with_capacity(FRAME_MA);
    frame.extend_from_slice(local);
    for m in messages {
        frame.extend_from_slice(m);
    }
    frame.extend_from_slice(help_flags);
    frame.push(own_reserve);
    Ok(encoder.encode(params, &frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn setup() -> (GraphEncoder, Vec<f64>) {
        let mut lb = LayoutBuilder::new();
        let enc = GraphEncoder::new(&mut lb);
        let mut p = vec![0.0; lb.len()];
        enc.init(&mut p, &mut rng::stream(3));
        // non-zero biases so the checks are not trivially about zeros
        for b in enc.edge.inputs * enc.edge.outputs..enc.edge.param_len() {
            p[b] = 0.05;
        }
        (enc, p)
    }

    const LOCAL: [f64; 7] = [0.2, 0.1, 0.4, 0.5, 0.3, 0.2, 0.9];
    const A: [f64; 7] = [0.9, 0.2, 0.1, 0.3, 0.6, 0.0, 0.1];
    const B: [f64; 7] = [0.0, 0.0, 0.0, 0.7, 0.1, 0.4, 0.5];
    const C: [f64; 7] = [0.5, 0.5, 0.5, 0.2, 0.8, 0.3, 0.0];

    #[test]
    fn identical_messages_aggregate_to_one() {
        let (enc, p) = setup();
        // mean of three copies equals the single transformed message
        let mut cache = EncoderCache::default();
        let mut frame = vec![0.0; FRAME_MA];
        frame[..7].copy_from_slice(&LOCAL);
        for m in 0..3 {
            frame[7 + 7 * m..14 + 7 * m].copy_from_slice(&A);
        }
        let mut out = vec![0.0; EMBEDDING_WIDTH];
        enc.forward(&p, &frame, 1, &mut cache, &mut out);
        let mut single = vec![0.0; EDGE_HIDDEN];
        enc.edge.forward(&p, &A, 1, &mut single);
        relu(&mut single);
        for h in 0..EDGE_HIDDEN {
            assert!((cache.node_in[h] - single[h]).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_invariant() {
        let (enc, p) = setup();
        let flags = [1.0, 0.0, 1.0];
        let a = gnn_encode(&enc, &p, &LOCAL, &[&A, &B, &C], &flags, 0.4).unwrap();
        for order in [[&B, &A, &C], [&C, &B, &A], [&A, &C, &B]] {
            let msgs: [&[f64]; 3] = [order[0], order[1], order[2]];
            let b = gnn_encode(&enc, &p, &LOCAL, &msgs, &flags, 0.4).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_weights_give_zero_embedding() {
        let (enc, p) = setup();
        let z = vec![0.0; p.len()];
        let out = gnn_encode(&enc, &z, &LOCAL, &[&A, &B, &C], &[1.0, 1.0, 0.0], 0.7).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn deterministic_and_dimension_checked() {
        let (enc, p) = setup();
        let a = gnn_encode(&enc, &p, &LOCAL, &[&A, &B, &C], &[0.0; 3], 0.1).unwrap();
        let b = gnn_encode(&enc, &p, &LOCAL, &[&A, &B, &C], &[0.0; 3], 0.1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), EMBEDDING_WIDTH);
        assert!(matches!(
            gnn_encode(&enc, &p, &LOCAL[..6], &[&A, &B, &C], &[0.0; 3], 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            gnn_encode(&enc, &p, &LOCAL, &[&A, &B], &[0.0; 3], 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (enc, p) = setup();
        let mut r = rng::stream(8);
        use rand::Rng as _;
        let input: Vec<f64> = (0..2 * FRAME_MA).map(|_| r.random_range(0.0..1.0)).collect();
        let loss = |params: &[f64]| {
            let mut cache = EncoderCache::default();
            let mut out = vec![0.0; 2 * EMBEDDING_WIDTH];
            enc.forward(params, &input, 2, &mut cache, &mut out);
            out.iter().enumerate().map(|(i, v)| v * (i as f64 * 0.1 - 1.0)).sum::<f64>()
        };
        let mut cache = EncoderCache::default();
        let mut out = vec![0.0; 2 * EMBEDDING_WIDTH];
        enc.forward(&p, &input, 2, &mut cache, &mut out);
        let d_out: Vec<f64> = (0..2 * EMBEDDING_WIDTH).map(|i| i as f64 * 0.1 - 1.0).collect();
        let mut grads = vec![0.0; p.len()];
        enc.backward(&p, &cache, &d_out, &mut grads);
        for k in (0..p.len()).step_by(13) {
            let mut q = p.clone();
            q[k] += 1e-6;
            let up = loss(&q);
            q[k] -= 2e-6;
            let fd = (up - loss(&q)) / 2e-6;
            assert!((fd - grads[k]).abs() < 1e-5, "param {k}: {fd} vs {}", grads[k]);
        }
    }
}
