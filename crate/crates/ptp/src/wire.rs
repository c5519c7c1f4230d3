//! Frames: a 4-byte big-endian length followed by one JSON object
//! `{type, session-id, slot, payload-hex, code?}`.

use std::io::{self, Read, Write};

use mems_core::group::Group;
use mems_core::mems::Roster;
use mems_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::error::{ErrorCode, PtpError};

pub const MAX_FRAME: usize = 16 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameType {
    Create,
    Commit,
    CommitsBcast,
    #[serde(rename = "ROUND1_BCAST")]
    Round1Bcast,
    Partial,
    PartialsBcast,
    Error,
    Ack,
    /// Request for a session's roster and message.
    Info,
    Audit,
    AuditLog,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(rename = "type")]
    pub kind: FrameType,
    #[serde(rename = "session-id", default)]
    pub session_id: String,
    #[serde(default)]
    pub slot: u32,
    #[serde(rename = "payload-hex", default)]
    pub payload_hex: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<ErrorCode>,
}

impl Frame {
    pub fn new(kind: FrameType, session_id: impl Into<String>, slot: u32, payload: &[u8]) -> Self {
        Frame {
            kind,
            session_id: session_id.into(),
            slot,
            payload_hex: hex::encode(payload),
            code: None,
        }
    }

    pub fn error(session_id: impl Into<String>, err: &PtpError) -> Self {
        Frame {
            kind: FrameType::Error,
            session_id: session_id.into(),
            slot: 0,
            payload_hex: hex::encode(err.detail.as_bytes()),
            code: Some(err.code),
        }
    }

    pub fn payload(&self) -> Result<Vec<u8>, PtpError> {
        hex::decode(&self.payload_hex).map_err(|e| bad_frame(format!("payload-hex: {e}")))
    }

    /// Turns an `ERROR` frame back into the rejection it carries.
    pub fn as_error(&self) -> Option<PtpError> {
        (self.kind == FrameType::Error).then(|| {
            let detail = self
                .payload()
                .ok()
                .and_then(|p| String::from_utf8(p).ok())
                .unwrap_or_default();
            PtpError::new(self.code.unwrap_or(ErrorCode::BadFrame), detail)
        })
    }
}

pub fn bad_frame(detail: impl Into<String>) -> PtpError {
    PtpError::new(ErrorCode::BadFrame, detail)
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> io::Result<()> {
    let body = serde_json::to_vec(frame).map_err(io::Error::other)?;
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()
}

/// Reads one frame. `Ok(None)` on a clean end of stream. A body that is
/// not a valid frame is reported as `Ok(Some(Err(..)))` so the stream stays
/// usable.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Result<Frame, PtpError>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds limit"),
        ));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(Some(
        serde_json::from_slice(&body).map_err(|e| bad_frame(format!("frame body: {e}"))),
    ))
}

fn core(e: CoreError) -> PtpError {
    bad_frame(e.to_string())
}

/// `u32_be(n) ‖ enc(X_1) … enc(X_n) ‖ m`.
pub fn encode_create<G: Group>(g: &G, roster: &Roster<G>, message: &[u8]) -> Vec<u8> {
    let mut out = (roster.len() as u32).to_be_bytes().to_vec();
    for x in roster.keys() {
        out.extend(g.encode_element(x));
    }
    out.extend_from_slice(message);
    out
}

pub fn decode_create<G: Group>(g: &G, bytes: &[u8]) -> Result<(Roster<G>, Vec<u8>), PtpError> {
    let (n, rest) = split_u32(bytes)?;
    let keys_len = (n as usize)
        .checked_mul(g.element_len())
        .filter(|l| *l <= rest.len())
        .ok_or_else(|| bad_frame(format!("roster of {n} keys does not fit in payload")))?;
    let keys = decode_elements(g, &rest[..keys_len])?;
    let roster =
        Roster::new(keys).map_err(|_| PtpError::new(ErrorCode::EmptyRoster, "roster is empty"))?;
    Ok((roster, rest[keys_len..].to_vec()))
}

/// `u32_be(len t) ‖ t ‖ enc(w) ‖ enc(W)`.
pub fn encode_round1<G: Group>(g: &G, t: &[u8], w: &G::Scalar, big_w: &G::Element) -> Vec<u8> {
    let mut out = (t.len() as u32).to_be_bytes().to_vec();
    out.extend_from_slice(t);
    out.extend(g.encode_scalar(w));
    out.extend(g.encode_element(big_w));
    out
}

pub fn decode_round1<G: Group>(
    g: &G,
    bytes: &[u8],
) -> Result<(Vec<u8>, G::Scalar, G::Element), PtpError> {
    let (tl, rest) = split_u32(bytes)?;
    let tl = tl as usize;
    if rest.len() != tl + g.scalar_len() + g.element_len() {
        return Err(bad_frame(format!(
            "round-one payload has {} bytes after length",
            rest.len()
        )));
    }
    let (t, rest) = rest.split_at(tl);
    let (w, big_w) = rest.split_at(g.scalar_len());
    Ok((
        t.to_vec(),
        g.decode_scalar(w).map_err(core)?,
        g.decode_element(big_w).map_err(core)?,
    ))
}

pub fn encode_elements<G: Group>(g: &G, xs: &[G::Element]) -> Vec<u8> {
    xs.iter().flat_map(|x| g.encode_element(x)).collect()
}

pub fn decode_elements<G: Group>(g: &G, bytes: &[u8]) -> Result<Vec<G::Element>, PtpError> {
    let len = g.element_len();
    if bytes.len() % len != 0 {
        return Err(bad_frame(format!(
            "{} bytes is not a whole number of elements",
            bytes.len()
        )));
    }
    bytes
        .chunks(len)
        .map(|c| g.decode_element(c).map_err(core))
        .collect()
}

pub fn encode_scalars<G: Group>(g: &G, xs: &[G::Scalar]) -> Vec<u8> {
    xs.iter().flat_map(|x| g.encode_scalar(x)).collect()
}

pub fn decode_scalars<G: Group>(g: &G, bytes: &[u8]) -> Result<Vec<G::Scalar>, PtpError> {
    let len = g.scalar_len();
    if bytes.len() % len != 0 {
        return Err(bad_frame(format!(
            "{} bytes is not a whole number of scalars",
            bytes.len()
        )));
    }
    bytes
        .chunks(len)
        .map(|c| g.decode_scalar(c).map_err(core))
        .collect()
}

fn split_u32(bytes: &[u8]) -> Result<(u32, &[u8]), PtpError> {
    if bytes.len() < 4 {
        return Err(bad_frame("payload shorter than its length prefix"));
    }
    let (head, rest) = bytes.split_at(4);
    Ok((u32::from_be_bytes(head.try_into().expect("4 bytes")), rest))
}
