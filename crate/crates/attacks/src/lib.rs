//! Attacks on naive multi-signature designs.

pub mod ksum;
pub mod rogue_key;
pub mod vs_mems;
pub mod wagner;

pub use ksum::{ksum_forge, ForgeryResult, KSumConfig, KSumReport};
pub use rogue_key::{rogue_key_attack, RogueKeyDemo};
pub use vs_mems::{ksum_attempt_vs_mems, timestamp_guessing, GuessReport, MemsAttemptReport};
pub use wagner::{wagner_solve, Entry, KSumInstance, Relation, WagnerConfig};

#[derive(Debug, thiserror::Error)]
pub enum AttackError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Core(#[from] mems_core::Error),
    #[error(transparent)]
    Coordinator(#[from] mems_ptp::PtpError),
}
