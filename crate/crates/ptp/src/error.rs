use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Error codes carried in `ERROR` frames and audit records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    UnknownSession,
    UnknownSlot,
    Duplicate,
    /// A commitment arrived after the commitment set was frozen.
    Frozen,
    WrongPhase,
    /// `(t, w, W)` or the partial list was requested before it exists.
    Unavailable,
    InvalidPartial,
    Aborted,
    EmptyRoster,
    Incomplete,
    BadFrame,
    Timeout,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 12] = [
        ErrorCode::UnknownSession,
        ErrorCode::UnknownSlot,
        ErrorCode::Duplicate,
        ErrorCode::Frozen,
        ErrorCode::WrongPhase,
        ErrorCode::Unavailable,
        ErrorCode::InvalidPartial,
        ErrorCode::Aborted,
        ErrorCode::EmptyRoster,
        ErrorCode::Incomplete,
        ErrorCode::BadFrame,
        ErrorCode::Timeout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::UnknownSession => "UNKNOWN_SESSION",
            ErrorCode::UnknownSlot => "UNKNOWN_SLOT",
            ErrorCode::Duplicate => "DUPLICATE",
            ErrorCode::Frozen => "FROZEN",
            ErrorCode::WrongPhase => "WRONG_PHASE",
            ErrorCode::Unavailable => "UNAVAILABLE",
            ErrorCode::InvalidPartial => "INVALID_PARTIAL",
            ErrorCode::Aborted => "ABORTED",
            ErrorCode::EmptyRoster => "EMPTY_ROSTER",
            ErrorCode::Incomplete => "INCOMPLETE",
            ErrorCode::BadFrame => "BAD_FRAME",
            ErrorCode::Timeout => "TIMEOUT",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ErrorCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown error code {s:?}"))
    }
}

/// A rejection by the coordinator.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {detail}")]
pub struct PtpError {
    pub code: ErrorCode,
    pub detail: String,
}

impl PtpError {
    pub fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        PtpError {
            code,
            detail: detail.into(),
        }
    }
}

/// Errors seen by clients of the TCP service.
#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("coordinator rejected request: {0}")]
    Rejected(PtpError),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Core(#[from] mems_core::Error),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for c in ErrorCode::ALL {
            assert_eq!(c.as_str().parse::<ErrorCode>(), Ok(c));
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
        }
        assert!("NOPE".parse::<ErrorCode>().is_err());
    }
}
