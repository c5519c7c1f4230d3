//! Public coordinator for MEMS signing sessions.
//!
//! Collects every commitment before fixing `t`, releases `(t, w, W)`, relays
//! partial signatures, and keeps an append-only audit log that anyone can
//! replay.

pub mod client;
pub mod coordinator;
pub mod error;
pub mod server;
pub mod session;
pub mod wire;

pub use client::{run_signer, PtpClient};
pub use coordinator::{CommitOutcome, Coordinator, PartialOutcome, PtpConfig};
pub use error::{ClientError, ErrorCode, PtpError};
pub use server::{PtpServer, ServerHandle};
pub use session::{
    check_ordering, replay, AuditEvent, AuditRecord, Phase, PtpSession, ReplayReport, SessionId,
};
