//! Wildfire lookout-tower simulator with a multi-agent learning harness.
//!
//! The crate is `no_std` with `alloc`: every module is a pure computation
//! over in-memory state. File formats, the CLI and plotting live in the
//! `lookout` companion crate.
//!
//! Layout:
//!
//! * [`noise`], [`scenario`] - seeded gradient noise, terrain and forest.
//! * [`weather`], [`fire`] - dynamic weather fields and fire spread.
//! * [`towers`], [`resources`], [`comms`] - the lookout-tower graph, the
//!   resource ledger and the broadcast / help-request protocol.
//! * [`reward`] - performance function and per-step rewards.
//! * [`env`] - the step loop tying the above together.
//! * [`nn`], [`learner`] - small dense networks, PPO-Clip, GAE, curiosity.
//! * [`curriculum`], [`policies`], [`harness`] - lessons, observation and
//!   action encodings, episodes, training and evaluation.

#![no_std]

extern crate alloc;

pub mod comms;
pub mod curriculum;
pub mod env;
mod error;
pub mod fire;
pub mod harness;
pub mod learner;
pub mod nn;
pub mod noise;
pub mod policies;
pub mod resources;
pub mod reward;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod towers;
pub mod weather;

pub use error::{Error, Result};

/// Number of time steps in one episode.
pub const EPISODE_LENGTH: u32 = 500;
