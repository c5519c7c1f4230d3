//! Comparison schemes and a loopback transport for counting messages.

pub mod insecure;
pub mod musig2;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::group::Group;
use crate::mems::{aggregate, AggregatedKey, KeyPair, Roster, Signature};
use crate::oracles::Params;

pub use insecure::{insecure_verify, InsecureSession, SigningOracle};
pub use musig2::{musig2_verify, VectorSignerSession, DEFAULT_V};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Mems,
    MuSig2,
    Insecure,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Mems, Scheme::MuSig2, Scheme::Insecure];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Mems => "mems",
            Scheme::MuSig2 => "musig2",
            Scheme::Insecure => "insecure",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mems" => Ok(Scheme::Mems),
            "musig2" => Ok(Scheme::MuSig2),
            "insecure" => Ok(Scheme::Insecure),
            other => Err(Error::Invalid(format!("unknown scheme {other:?}"))),
        }
    }
}

/// In-process peer-to-peer transport. Every delivery is one send plus one
/// receive, and both are counted.
#[derive(Debug)]
pub struct LoopbackBus {
    inboxes: Vec<VecDeque<(usize, Vec<u8>)>>,
    sent: u64,
    received: u64,
}

impl LoopbackBus {
    pub fn new(parties: usize) -> Self {
        LoopbackBus {
            inboxes: vec![VecDeque::new(); parties],
            sent: 0,
            received: 0,
        }
    }

    pub fn parties(&self) -> usize {
        self.inboxes.len()
    }

    /// Sends `payload` from `from` to every other party.
    pub fn broadcast(&mut self, from: usize, payload: &[u8]) {
        for to in 0..self.inboxes.len() {
            if to != from {
                self.inboxes[to].push_back((from, payload.to_vec()));
                self.sent += 1;
            }
        }
    }

    pub fn recv(&mut self, party: usize) -> Option<(usize, Vec<u8>)> {
        let m = self.inboxes[party].pop_front()?;
        self.received += 1;
        Some(m)
    }

    /// Drains everything queued for `party`, returned in sender order.
    pub fn drain(&mut self, party: usize) -> Vec<(usize, Vec<u8>)> {
        let mut out = Vec::new();
        while let Some(m) = self.recv(party) {
            out.push(m);
        }
        out.sort_by_key(|(from, _)| *from);
        out
    }

    pub fn message_count(&self) -> u64 {
        self.sent + self.received
    }
}

/// Messages exchanged by one signing run with `n` signers.
///
/// MEMS routes everything through the coordinator: `n` commitments in,
/// `2n` at release (commitment list plus offset bundle), `n` partials in
/// and `n` partial broadcasts out. The peer-to-peer schemes run two
/// all-to-all rounds, each counted as a send and a receive semi-round.
pub fn simulated_broadcast_message_count(scheme: Scheme, n: usize) -> Result<u64> {
    let n64 = n as u64;
    match scheme {
        Scheme::Mems if n == 0 => Err(Error::EmptyRoster),
        Scheme::Mems => Ok(5 * n64),
        _ if n < 2 => Err(Error::Invalid(format!(
            "peer-to-peer signing needs at least 2 parties, got {n}"
        ))),
        _ => Ok(4 * n64 * (n64 - 1)),
    }
}

fn encode_all<G: Group>(g: &G, xs: &[G::Element]) -> Vec<u8> {
    xs.iter().flat_map(|x| g.encode_element(x)).collect()
}

fn decode_all<G: Group>(g: &G, bytes: &[u8]) -> Result<Vec<G::Element>> {
    let len = g.element_len();
    if bytes.len() % len != 0 {
        return Err(Error::InvalidEncoding(format!(
            "{} bytes is not a multiple of {len}",
            bytes.len()
        )));
    }
    bytes.chunks(len).map(|c| g.decode_element(c)).collect()
}

fn gather<T: Clone>(own: usize, mine: T, received: Vec<(usize, T)>, n: usize) -> Result<Vec<T>> {
    let mut slots: Vec<Option<T>> = vec![None; n];
    slots[own] = Some(mine);
    for (from, v) in received {
        slots[from] = Some(v);
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::Invalid(format!("missing message from party {i}"))))
        .collect()
}

/// Runs a full peer-to-peer MuSig2-style signing over a [`LoopbackBus`].
pub fn run_musig2_over_bus<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    keypairs: &[KeyPair<G>],
    m: &[u8],
    v: usize,
    rng: &mut R,
) -> Result<(Signature<G>, AggregatedKey<G>, u64)> {
    let g = &params.group;
    let n = keypairs.len();
    let roster = Roster::new(keypairs.iter().map(|k| *k.public()).collect())?;
    let agg = aggregate(params, &roster);
    let mut bus = LoopbackBus::new(n);
    let mut sessions = keypairs
        .iter()
        .enumerate()
        .map(|(i, k)| VectorSignerSession::new(params, *k, &roster, i, m, v))
        .collect::<Result<Vec<_>>>()?;
    let mut own = Vec::with_capacity(n);
    for (i, s) in sessions.iter_mut().enumerate() {
        let vec = s.sign_round1(rng)?;
        bus.broadcast(i, &encode_all(g, &vec));
        own.push(vec);
    }
    let inboxes = (0..n)
        .map(|i| {
            bus.drain(i)
                .into_iter()
                .map(|(from, b)| Ok((from, decode_all(g, &b)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut partials = Vec::with_capacity(n);
    for ((i, s), got) in sessions.iter_mut().enumerate().zip(inboxes) {
        let vectors = gather(i, own[i].clone(), got, n)?;
        let si = s.sign_round2(&vectors, &agg)?;
        bus.broadcast(i, &g.encode_scalar(&si));
        partials.push(si);
    }
    let mut sig = None;
    for (i, s) in sessions.iter().enumerate() {
        let got = bus
            .drain(i)
            .into_iter()
            .map(|(from, b)| Ok((from, g.decode_scalar(&b)?)))
            .collect::<Result<Vec<_>>>()?;
        let all = gather(i, partials[i], got, n)?;
        sig = Some(s.finalize(&all)?);
    }
    Ok((sig.ok_or(Error::EmptyRoster)?, agg, bus.message_count()))
}

/// Runs the single-commitment two-round scheme over a [`LoopbackBus`].
pub fn run_insecure_over_bus<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    keypairs: &[KeyPair<G>],
    m: &[u8],
    rng: &mut R,
) -> Result<(Signature<G>, AggregatedKey<G>, u64)> {
    let g = &params.group;
    let n = keypairs.len();
    let roster = Roster::new(keypairs.iter().map(|k| *k.public()).collect())?;
    let agg = aggregate(params, &roster);
    let mut bus = LoopbackBus::new(n);
    let mut sessions = keypairs
        .iter()
        .enumerate()
        .map(|(i, k)| InsecureSession::new(params, *k, &roster, i, m))
        .collect::<Result<Vec<_>>>()?;
    let mut own = Vec::with_capacity(n);
    for (i, s) in sessions.iter_mut().enumerate() {
        let r = s.sign_round1(rng)?;
        bus.broadcast(i, &g.encode_element(&r));
        own.push(r);
    }
    let inboxes = (0..n)
        .map(|i| {
            bus.drain(i)
                .into_iter()
                .map(|(from, b)| Ok((from, g.decode_element(&b)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut partials = Vec::with_capacity(n);
    for ((i, s), got) in sessions.iter_mut().enumerate().zip(inboxes) {
        let rs = gather(i, own[i], got, n)?;
        let si = s.sign_round2(&rs, &agg)?;
        bus.broadcast(i, &g.encode_scalar(&si));
        partials.push(si);
    }
    let mut sig = None;
    for (i, s) in sessions.iter().enumerate() {
        let got = bus
            .drain(i)
            .into_iter()
            .map(|(from, b)| Ok((from, g.decode_scalar(&b)?)))
            .collect::<Result<Vec<_>>>()?;
        let all = gather(i, partials[i], got, n)?;
        sig = Some(s.finalize(&all)?);
    }
    Ok((sig.ok_or(Error::EmptyRoster)?, agg, bus.message_count()))
}
