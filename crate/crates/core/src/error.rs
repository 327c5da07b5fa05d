use alloc::string::String;

use crate::env::StepPhase;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("difficulty must be in 1..=10, got {0}")]
    InvalidDifficulty(u8),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("need at least {needed} towers for {neighbors} neighbours, got {towers}")]
    TooFewTowers {
        towers: usize,
        neighbors: usize,
        needed: usize,
    },

    #[error("no tree can be ignited: the forest is empty")]
    NoIgnition,

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("step phase out of order: expected {expected:?}, got {found:?}")]
    PhaseOrder { expected: StepPhase, found: StepPhase },

    #[error("episode already finished after {0} steps")]
    EpisodeFinished(u32),

    #[error("training observer failed: {0}")]
    Observer(String),
}
