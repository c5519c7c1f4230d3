use thiserror::Error;

/// Errors raised by the group layer, the oracles and the signing schemes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("inversion of zero scalar")]
    ZeroInversion,
    #[error("invalid encoding: {0}")]
    InvalidEncoding(String),
    #[error("element is not in the prime-order subgroup")]
    NotInSubgroup,
    #[error("group setup failed: {0}")]
    Setup(String),
    #[error("invalid oracle configuration: {0}")]
    OracleConfig(String),
    #[error("public key is not a member of the roster")]
    NotInRoster,
    #[error("empty input to {0}")]
    EmptyInput(&'static str),
    #[error("roster must contain at least one key")]
    EmptyRoster,
    #[error("slot {index} out of range for roster of {len}")]
    SlotOutOfRange { index: usize, len: usize },
    #[error("key pair does not match roster slot {0}")]
    RosterMismatch(usize),
    #[error("operation {op} not allowed in phase {phase}")]
    Phase {
        op: &'static str,
        phase: &'static str,
    },
    #[error("coordinator bundle is inconsistent: {0}")]
    InconsistentBundle(&'static str),
    #[error("own commitment does not match slot {0} in the bundle")]
    CommitmentMismatch(usize),
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
