//! Generalised advantage estimation.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Advantages and returns-to-go for one trajectory segment.
///
/// `dones[t]` marks that the episode terminated after step `t`; nothing is
/// bootstrapped across it. `bootstrap` is `V(s_n)` for the state following
/// the last step and is ignored when the last step is terminal.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    for (what, len) in [("gae values", values.len()), ("gae done flags", dones.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let keep = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * keep - values[t];
        running = delta + gamma * lambda * keep * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}
