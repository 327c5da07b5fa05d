//! File formats, run directories and the command line for `lookout-core`.
//!
//! A training run directory holds:
//!
//! * `config.toml` - the resolved [`ExperimentConfig`](lookout_core::harness::ExperimentConfig).
//! * `manifest.json` - config, content hashes and the neighbour graph.
//! * `episodes.csv`, `summary.csv`, `lessons.csv` - see [`metrics`].
//! * `checkpoints/ckpt-<step>.bin` - the newest few checkpoints.
//! * `scenario.toml` - the pinned scenario for fixed-seed runs.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod manifest;
pub mod metrics;
pub mod plot;
pub mod run;
pub mod scenario_file;
