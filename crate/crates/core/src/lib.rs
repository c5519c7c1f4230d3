//! Schnorr multi-signatures with a public coordinator, over a pluggable
//! prime-order group, plus comparison schemes.

pub mod baselines;
mod error;
pub mod group;
pub mod instrument;
pub mod mems;
pub mod oracles;
pub mod schnorr;

pub use error::{Error, Result};
pub use group::{Backend, Group, GroupDescription, Ristretto, ToyGroup};
pub use mems::{
    aggregate, assemble, sign_locally, verify, verify_partial, AggregatedKey, KeyPair, Roster,
    Round1Bundle, Signature, SignerConfig, SignerPhase, SignerSession,
};
pub use oracles::{OracleConfig, Params};
