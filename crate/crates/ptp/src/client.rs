use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use mems_core::group::Group;
use mems_core::mems::{
    aggregate, AggregatedKey, KeyPair, Roster, Round1Bundle, Signature, SignerSession,
};
use mems_core::oracles::Params;
use rand::RngCore;

use crate::error::ClientError;
use crate::session::{AuditRecord, SessionId};
use crate::wire::{self, read_frame, write_frame, Frame, FrameType};

pub struct PtpClient {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl PtpClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, ClientError> {
        Self::connect_with_timeout(
            addr,
            Some(crate::server::DEFAULT_WAIT + Duration::from_secs(10)),
        )
    }

    pub fn connect_with_timeout(
        addr: impl ToSocketAddrs,
        read_timeout: Option<Duration>,
    ) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(read_timeout)?;
        let _ = stream.set_nodelay(true);
        Ok(PtpClient {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    pub fn send(&mut self, frame: &Frame) -> Result<(), ClientError> {
        Ok(write_frame(&mut self.writer, frame)?)
    }

    /// Next frame; `ERROR` frames become [`ClientError::Rejected`].
    pub fn recv(&mut self) -> Result<Frame, ClientError> {
        let frame = read_frame(&mut self.reader)?
            .ok_or_else(|| ClientError::Protocol("connection closed".into()))?
            .map_err(ClientError::Rejected)?;
        match frame.as_error() {
            Some(e) => Err(ClientError::Rejected(e)),
            None => Ok(frame),
        }
    }

    fn expect(&mut self, kind: FrameType) -> Result<Frame, ClientError> {
        let f = self.recv()?;
        if f.kind != kind {
            return Err(ClientError::Protocol(format!(
                "expected {kind:?}, got {:?}",
                f.kind
            )));
        }
        Ok(f)
    }

    fn payload(f: &Frame) -> Result<Vec<u8>, ClientError> {
        f.payload().map_err(ClientError::Rejected)
    }

    pub fn create_session<G: Group>(
        &mut self,
        g: &G,
        roster: &Roster<G>,
        m: &[u8],
    ) -> Result<SessionId, ClientError> {
        self.send(&Frame::new(
            FrameType::Create,
            "",
            0,
            &wire::encode_create(g, roster, m),
        ))?;
        let ack = self.expect(FrameType::Ack)?;
        ack.session_id.parse().map_err(ClientError::Rejected)
    }

    pub fn session_info<G: Group>(
        &mut self,
        g: &G,
        id: SessionId,
    ) -> Result<(Roster<G>, Vec<u8>), ClientError> {
        self.send(&Frame::new(FrameType::Info, id.to_string(), 0, b""))?;
        let f = self.expect(FrameType::Info)?;
        wire::decode_create(g, &Self::payload(&f)?).map_err(ClientError::Rejected)
    }

    pub fn audit(&mut self, id: SessionId) -> Result<Vec<AuditRecord>, ClientError> {
        self.send(&Frame::new(FrameType::Audit, id.to_string(), 0, b""))?;
        let f = self.expect(FrameType::AuditLog)?;
        serde_json::from_slice(&Self::payload(&f)?)
            .map_err(|e| ClientError::Protocol(e.to_string()))
    }

    /// Sends `R_i` and waits for the commitment list and `(t, w, W)`.
    pub fn commit<G: Group>(
        &mut self,
        g: &G,
        id: SessionId,
        slot: usize,
        r: &G::Element,
    ) -> Result<Round1Bundle<G>, ClientError> {
        self.send(&Frame::new(
            FrameType::Commit,
            id.to_string(),
            slot as u32,
            &g.encode_element(r),
        ))?;
        self.expect(FrameType::Ack)?;
        let commits = self.expect(FrameType::CommitsBcast)?;
        let commitments =
            wire::decode_elements(g, &Self::payload(&commits)?).map_err(ClientError::Rejected)?;
        let round1 = self.expect(FrameType::Round1Bcast)?;
        let (timestamp, offset, offset_commitment) =
            wire::decode_round1(g, &Self::payload(&round1)?).map_err(ClientError::Rejected)?;
        Ok(Round1Bundle {
            commitments,
            timestamp,
            offset,
            offset_commitment,
        })
    }

    /// Sends `s_i` and waits for every partial signature.
    pub fn partial<G: Group>(
        &mut self,
        g: &G,
        id: SessionId,
        slot: usize,
        s: &G::Scalar,
    ) -> Result<Vec<G::Scalar>, ClientError> {
        self.send(&Frame::new(
            FrameType::Partial,
            id.to_string(),
            slot as u32,
            &g.encode_scalar(s),
        ))?;
        self.expect(FrameType::Ack)?;
        let f = self.expect(FrameType::PartialsBcast)?;
        wire::decode_scalars(g, &Self::payload(&f)?).map_err(ClientError::Rejected)
    }
}

/// Runs one signer end to end against a remote coordinator. The roster and
/// message are fetched from the coordinator and the key must sit at `slot`.
pub fn run_signer<G: Group, R: RngCore + ?Sized>(
    client: &mut PtpClient,
    params: &Params<G>,
    keypair: KeyPair<G>,
    id: SessionId,
    slot: usize,
    rng: &mut R,
) -> Result<(Signature<G>, AggregatedKey<G>, Vec<u8>), ClientError> {
    let g = &params.group;
    let (roster, m) = client.session_info(g, id)?;
    let agg = aggregate(params, &roster);
    let mut session = SignerSession::new(params, keypair, &roster, slot, &m)?;
    let r = session.sign_round1(rng)?;
    let bundle = client.commit(g, id, slot, &r)?;
    let s = session.sign_round2(&bundle, &agg)?;
    let partials = client.partial(g, id, slot, &s)?;
    let sig = session.finalize(&partials)?;
    Ok((sig, agg, m))
}
