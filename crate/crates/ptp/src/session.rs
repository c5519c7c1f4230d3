//! Per-session state machine, audit log and replay.
//!
//! The machine is pure: time and the session nonce are passed in, so the same
//! code drives the live coordinator and audit replay.

use std::fmt;
use std::str::FromStr;

use mems_core::group::Group;
use mems_core::mems::{aggregate, AggregatedKey, Roster, Round1Bundle, Signature};
use mems_core::oracles::{h2, Params};
use serde::{Deserialize, Serialize};

use crate::error::{ErrorCode, PtpError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(pub [u8; 16]);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for SessionId {
    type Err = PtpError;

    fn from_str(s: &str) -> Result<Self, PtpError> {
        let bytes =
            hex::decode(s).map_err(|e| PtpError::new(ErrorCode::UnknownSession, e.to_string()))?;
        let arr: [u8; 16] = bytes
            .try_into()
            .map_err(|_| PtpError::new(ErrorCode::UnknownSession, "session id must be 16 bytes"))?;
        Ok(SessionId(arr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    CollectingCommitments,
    Round1Released,
    CollectingPartials,
    Completed,
    Aborted,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AuditEvent {
    Created {
        session_id: String,
        roster: Vec<String>,
        message: String,
        verify_partials: bool,
        deadline_ms: Option<u64>,
    },
    CommitmentReceived {
        slot: usize,
        commitment: String,
    },
    /// The event that fixes `t`; `w` and `W` follow from it.
    Released {
        t: String,
        w: String,
        #[serde(rename = "W")]
        big_w: String,
    },
    PartialReceived {
        slot: usize,
        partial: String,
    },
    Completed,
    Aborted {
        reason: String,
    },
    Rejected {
        op: String,
        slot: usize,
        code: ErrorCode,
        payload: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub time_ms: u64,
    #[serde(flatten)]
    pub event: AuditEvent,
}

/// How the release transition obtains `t`.
#[derive(Debug, Clone, Copy)]
pub enum TimestampSource<'a> {
    /// `unix-ms ‖ session nonce`, or the bare timestamp in strict mode.
    Clock { strict: bool },
    /// A value taken from an audit log under replay.
    Given(&'a [u8]),
}

pub const OP_COMMIT: &str = "commit";
pub const OP_PARTIAL: &str = "partial";

#[derive(Debug)]
struct PartialCheck<G: Group> {
    agg: AggregatedKey<G>,
    challenge: Option<G::Scalar>,
}

#[derive(Debug)]
pub struct PtpSession<G: Group> {
    id: SessionId,
    roster: Roster<G>,
    message: Vec<u8>,
    phase: Phase,
    commitments: Vec<Option<G::Element>>,
    nonce: [u8; 16],
    release: Option<Round1Bundle<G>>,
    partials: Vec<Option<G::Scalar>>,
    message_count: u64,
    audit: Vec<AuditRecord>,
    deadline_ms: Option<u64>,
    check: Option<PartialCheck<G>>,
}

impl<G: Group> PtpSession<G> {
    pub fn new(
        params: &Params<G>,
        id: SessionId,
        roster: Roster<G>,
        message: &[u8],
        nonce: [u8; 16],
        now_ms: u64,
        deadline_ms: Option<u64>,
        verify_partials: bool,
    ) -> Self {
        let g = &params.group;
        let n = roster.len();
        let check = verify_partials.then(|| PartialCheck {
            agg: aggregate(params, &roster),
            challenge: None,
        });
        let mut session = PtpSession {
            id,
            roster,
            message: message.to_vec(),
            phase: Phase::CollectingCommitments,
            commitments: vec![None; n],
            nonce,
            release: None,
            partials: vec![None; n],
            message_count: 0,
            audit: Vec::new(),
            deadline_ms,
            check,
        };
        let event = AuditEvent::Created {
            session_id: id.to_string(),
            roster: session
                .roster
                .keys()
                .iter()
                .map(|x| g.element_to_hex(x))
                .collect(),
            message: hex::encode(message),
            verify_partials,
            deadline_ms,
        };
        session.log(now_ms, event);
        session
    }

    fn log(&mut self, now_ms: u64, event: AuditEvent) {
        let seq = self.audit.len() as u64;
        self.audit.push(AuditRecord {
            seq,
            time_ms: now_ms,
            event,
        });
    }

    fn reject(
        &mut self,
        now_ms: u64,
        op: &str,
        slot: usize,
        payload: String,
        err: PtpError,
    ) -> PtpError {
        self.log(
            now_ms,
            AuditEvent::Rejected {
                op: op.to_string(),
                slot,
                code: err.code,
                payload,
            },
        );
        err
    }

    pub fn id(&self) -> SessionId {
        self.id
    }

    pub fn roster(&self) -> &Roster<G> {
        &self.roster
    }

    pub fn message(&self) -> &[u8] {
        &self.message
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn n(&self) -> usize {
        self.roster.len()
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    pub fn deadline_ms(&self) -> Option<u64> {
        self.deadline_ms
    }

    /// Aborts a session still collecting commitments past its deadline.
    /// Returns true if this call performed the abort.
    pub fn expire(&mut self, now_ms: u64) -> bool {
        match self.deadline_ms {
            Some(d) if self.phase == Phase::CollectingCommitments && now_ms > d => {
                let missing = self.commitments.iter().filter(|c| c.is_none()).count();
                self.phase = Phase::Aborted;
                self.log(
                    now_ms,
                    AuditEvent::Aborted {
                        reason: format!("commit deadline passed, {missing} missing"),
                    },
                );
                true
            }
            _ => false,
        }
    }

    /// Records `R` for `slot`. The last commitment triggers the release
    /// transition in the same call, so nothing can slip in after `t` is fixed.
    pub fn submit_commitment(
        &mut self,
        params: &Params<G>,
        slot: usize,
        commitment: G::Element,
        now_ms: u64,
        ts: TimestampSource<'_>,
    ) -> Result<Option<Round1Bundle<G>>, PtpError> {
        let g = &params.group;
        let payload = g.element_to_hex(&commitment);
        self.expire(now_ms);
        let err = if self.phase == Phase::Aborted {
            Some(PtpError::new(ErrorCode::Aborted, "session aborted"))
        } else if slot >= self.n() {
            Some(PtpError::new(
                ErrorCode::UnknownSlot,
                format!("slot {slot} outside roster of {}", self.n()),
            ))
        } else if self.phase != Phase::CollectingCommitments {
            Some(PtpError::new(
                ErrorCode::Frozen,
                format!("commitments frozen in phase {}", self.phase),
            ))
        } else if self.commitments[slot].is_some() {
            Some(PtpError::new(
                ErrorCode::Duplicate,
                format!("slot {slot} already committed"),
            ))
        } else {
            None
        };
        if let Some(e) = err {
            return Err(self.reject(now_ms, OP_COMMIT, slot, payload, e));
        }
        self.commitments[slot] = Some(commitment);
        self.message_count += 1;
        self.log(
            now_ms,
            AuditEvent::CommitmentReceived {
                slot,
                commitment: payload,
            },
        );
        if self.commitments.iter().any(Option::is_none) {
            return Ok(None);
        }
        self.release(params, now_ms, ts).map(Some)
    }

    fn release(
        &mut self,
        params: &Params<G>,
        now_ms: u64,
        ts: TimestampSource<'_>,
    ) -> Result<Round1Bundle<G>, PtpError> {
        let g = &params.group;
        let t = match ts {
            TimestampSource::Clock { strict } => {
                let mut t = now_ms.to_be_bytes().to_vec();
                if !strict {
                    t.extend_from_slice(&self.nonce);
                }
                t
            }
            TimestampSource::Given(t) => t.to_vec(),
        };
        let commitments: Vec<_> = self
            .commitments
            .iter()
            .map(|c| c.expect("all slots filled"))
            .collect();
        let bundle = Round1Bundle::new(params, commitments, t)
            .map_err(|e| PtpError::new(ErrorCode::BadFrame, e.to_string()))?;
        if let Some(check) = &mut self.check {
            let u = bundle.joint_commitment(g);
            check.challenge = Some(h2(params, &check.agg.key, &u, &self.message));
        }
        self.phase = Phase::Round1Released;
        // commitment list and (t, w, W) go out as separate messages
        self.message_count += 2 * self.n() as u64;
        self.log(
            now_ms,
            AuditEvent::Released {
                t: hex::encode(&bundle.timestamp),
                w: g.scalar_to_hex(&bundle.offset),
                big_w: g.element_to_hex(&bundle.offset_commitment),
            },
        );
        self.release = Some(bundle.clone());
        Ok(bundle)
    }

    pub fn submit_partial(
        &mut self,
        params: &Params<G>,
        slot: usize,
        partial: G::Scalar,
        now_ms: u64,
    ) -> Result<Option<Vec<G::Scalar>>, PtpError> {
        let g = &params.group;
        let payload = g.scalar_to_hex(&partial);
        self.expire(now_ms);
        let err = if self.phase == Phase::Aborted {
            Some(PtpError::new(ErrorCode::Aborted, "session aborted"))
        } else if slot >= self.n() {
            Some(PtpError::new(
                ErrorCode::UnknownSlot,
                format!("slot {slot} outside roster of {}", self.n()),
            ))
        } else if !matches!(
            self.phase,
            Phase::Round1Released | Phase::CollectingPartials
        ) {
            Some(PtpError::new(
                ErrorCode::WrongPhase,
                format!("partials not accepted in phase {}", self.phase),
            ))
        } else if self.partials[slot].is_some() {
            Some(PtpError::new(
                ErrorCode::Duplicate,
                format!("slot {slot} already submitted a partial"),
            ))
        } else if !self.partial_ok(params, slot, &partial) {
            Some(PtpError::new(
                ErrorCode::InvalidPartial,
                format!("partial for slot {slot} does not verify"),
            ))
        } else {
            None
        };
        if let Some(e) = err {
            return Err(self.reject(now_ms, OP_PARTIAL, slot, payload, e));
        }
        self.partials[slot] = Some(partial);
        self.message_count += 1;
        self.phase = Phase::CollectingPartials;
        self.log(
            now_ms,
            AuditEvent::PartialReceived {
                slot,
                partial: payload,
            },
        );
        if self.partials.iter().any(Option::is_none) {
            return Ok(None);
        }
        self.phase = Phase::Completed;
        self.message_count += self.n() as u64;
        self.log(now_ms, AuditEvent::Completed);
        Ok(Some(
            self.partials
                .iter()
                .map(|s| s.expect("all partials present"))
                .collect(),
        ))
    }

    fn partial_ok(&self, params: &Params<G>, slot: usize, partial: &G::Scalar) -> bool {
        let (Some(check), Some(bundle)) = (&self.check, &self.release) else {
            return true;
        };
        mems_core::mems::verify_partial(
            params,
            &bundle.commitments[slot],
            &self.roster.keys()[slot],
            &check.agg.coefficients[slot],
            &bundle.offset,
            check.challenge.as_ref().expect("challenge set at release"),
            partial,
        )
    }

    /// `(t, w, W)` and the commitment list, once released.
    pub fn round1_bundle(&self) -> Result<&Round1Bundle<G>, PtpError> {
        match (&self.release, self.phase) {
            (_, Phase::Aborted) => Err(PtpError::new(ErrorCode::Aborted, "session aborted")),
            (Some(b), _) => Ok(b),
            (None, _) => Err(PtpError::new(
                ErrorCode::Unavailable,
                "round one not released",
            )),
        }
    }

    pub fn partials(&self) -> Result<Vec<G::Scalar>, PtpError> {
        match self.phase {
            Phase::Completed => Ok(self.partials.iter().map(|s| s.expect("complete")).collect()),
            Phase::Aborted => Err(PtpError::new(ErrorCode::Aborted, "session aborted")),
            _ => Err(PtpError::new(
                ErrorCode::Unavailable,
                "partials not complete",
            )),
        }
    }

    /// Wire messages exchanged in a completed session.
    pub fn message_count(&self) -> Result<u64, PtpError> {
        if self.phase != Phase::Completed {
            return Err(PtpError::new(
                ErrorCode::Incomplete,
                format!("session in phase {}", self.phase),
            ));
        }
        Ok(self.message_count)
    }

    /// The assembled signature of a completed session.
    pub fn signature(&self, group: &G) -> Result<Signature<G>, PtpError> {
        let partials = self.partials()?;
        let bundle = self.round1_bundle()?;
        Ok(Signature {
            commitment: bundle.joint_commitment(group),
            s: group.scalar_sum(&partials),
        })
    }
}

/// Checks that `t` is fixed strictly after the last commitment event and
/// that no commitment is accepted afterwards.
pub fn check_ordering(records: &[AuditRecord]) -> Result<(), String> {
    let n = match records.first().map(|r| &r.event) {
        Some(AuditEvent::Created { roster, .. }) => roster.len(),
        _ => return Err("log does not start with a creation event".into()),
    };
    let mut commits = 0usize;
    let mut released_at = None;
    for r in records {
        match &r.event {
            AuditEvent::CommitmentReceived { .. } => {
                if let Some(at) = released_at {
                    return Err(format!(
                        "commitment at seq {} after release at seq {at}",
                        r.seq
                    ));
                }
                commits += 1;
            }
            AuditEvent::Released { .. } => {
                if released_at.is_some() {
                    return Err(format!("second release at seq {}", r.seq));
                }
                if commits != n {
                    return Err(format!(
                        "release at seq {} after {commits} of {n} commitments",
                        r.seq
                    ));
                }
                released_at = Some(r.seq);
            }
            _ => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub session_id: SessionId,
    pub phase: Phase,
    pub n: usize,
    /// Present only for completed sessions.
    pub message_count: Option<u64>,
    /// Whether the assembled signature verifies, for completed sessions.
    pub signature_valid: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("replay failed at record {index}: {reason}")]
pub struct ReplayError {
    pub index: usize,
    pub reason: String,
}

fn replay_err(index: usize, reason: impl Into<String>) -> ReplayError {
    ReplayError {
        index,
        reason: reason.into(),
    }
}

/// Drives a fresh state machine with the recorded inputs and requires it to
/// regenerate the log record for record.
pub fn replay<G: Group>(
    params: &Params<G>,
    records: &[AuditRecord],
) -> Result<ReplayReport, ReplayError> {
    let g = &params.group;
    let first = records.first().ok_or_else(|| replay_err(0, "empty log"))?;
    let AuditEvent::Created {
        session_id,
        roster,
        message,
        verify_partials,
        deadline_ms,
    } = &first.event
    else {
        return Err(replay_err(0, "log does not start with a creation event"));
    };
    let id: SessionId = session_id
        .parse()
        .map_err(|e: PtpError| replay_err(0, e.detail))?;
    let keys = roster
        .iter()
        .map(|x| g.element_from_hex(x))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| replay_err(0, e.to_string()))?;
    let roster = Roster::new(keys).map_err(|e| replay_err(0, e.to_string()))?;
    let message = hex::decode(message).map_err(|e| replay_err(0, e.to_string()))?;
    let mut session = PtpSession::new(
        params,
        id,
        roster,
        &message,
        [0; 16],
        first.time_ms,
        *deadline_ms,
        *verify_partials,
    );
    let mut i = 1;
    while i < records.len() {
        let rec = &records[i];
        let now = rec.time_ms;
        // time-driven aborts are inputs too
        if let AuditEvent::Aborted { .. } = rec.event {
            session.expire(now);
            i += 1;
            continue;
        }
        match &rec.event {
            AuditEvent::CommitmentReceived {
                slot,
                commitment: hexed,
            }
            | AuditEvent::Rejected {
                op: _,
                slot,
                code: _,
                payload: hexed,
            } if is_commit(&rec.event) => {
                let r = g
                    .element_from_hex(hexed)
                    .map_err(|e| replay_err(i, e.to_string()))?;
                let t = match records.get(i + 1).map(|n| &n.event) {
                    Some(AuditEvent::Released { t, .. }) => {
                        hex::decode(t).map_err(|e| replay_err(i + 1, e.to_string()))?
                    }
                    _ => Vec::new(),
                };
                // an empty t makes an unexpected release fail loudly below
                let _ =
                    session.submit_commitment(params, *slot, r, now, TimestampSource::Given(&t));
                if matches!(
                    session.audit().last().map(|r| &r.event),
                    Some(AuditEvent::Released { .. })
                ) {
                    i += 1;
                }
            }
            AuditEvent::PartialReceived {
                slot,
                partial: hexed,
            }
            | AuditEvent::Rejected {
                slot,
                payload: hexed,
                ..
            } => {
                let s = g
                    .scalar_from_hex(hexed)
                    .map_err(|e| replay_err(i, e.to_string()))?;
                let _ = session.submit_partial(params, *slot, s, now);
                if matches!(
                    session.audit().last().map(|r| &r.event),
                    Some(AuditEvent::Completed)
                ) {
                    i += 1;
                }
            }
            other => return Err(replay_err(i, format!("unexpected event {other:?}"))),
        }
        i += 1;
    }
    let regenerated = session.audit();
    if let Some(k) =
        (0..records.len().max(regenerated.len())).find(|&k| records.get(k) != regenerated.get(k))
    {
        return Err(replay_err(
            k,
            format!(
                "recorded {:?} but replay produced {:?}",
                records.get(k),
                regenerated.get(k)
            ),
        ));
    }
    check_ordering(records).map_err(|e| replay_err(0, e))?;
    let signature_valid = (session.phase() == Phase::Completed).then(|| {
        let agg = aggregate(params, session.roster());
        session
            .signature(g)
            .map(|sig| mems_core::mems::verify(params, &agg.key, session.message(), &sig))
            .unwrap_or(false)
    });
    Ok(ReplayReport {
        session_id: id,
        phase: session.phase(),
        n: session.n(),
        message_count: session.message_count().ok(),
        signature_valid,
    })
}

fn is_commit(event: &AuditEvent) -> bool {
    match event {
        AuditEvent::CommitmentReceived { .. } => true,
        AuditEvent::Rejected { op, .. } => op == OP_COMMIT,
        _ => false,
    }
}
