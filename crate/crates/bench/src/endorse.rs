//! Endorsement flow of a permissioned ledger, reduced to what affects
//! signature size and committer-side verification.
//!
//! A client signs a proposal, every endorser signs the proposal response,
//! the orderer packs transactions into a block and the committer verifies
//! every endorsement. In `mems` mode the endorsers run one coordinated
//! session and attach a single joint signature; in `individual` mode each
//! attaches its own single-signer signature. Both modes list the endorsers'
//! public keys in the transaction.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use mems_core::group::Group;
use mems_core::mems::{aggregate, verify, KeyPair, Roster, Signature, SignerSession};
use mems_core::oracles::Params;
use mems_core::schnorr;
use mems_ptp::Coordinator;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::{summarize, BenchError, Result};

const WAIT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mems,
    Individual,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Mems, Mode::Individual];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Mems => "mems",
            Mode::Individual => "individual",
        })
    }
}

impl FromStr for Mode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mems" => Ok(Mode::Mems),
            "individual" => Ok(Mode::Individual),
            other => Err(BenchError::Invalid(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadSizes {
    pub header: usize,
    pub proposal: usize,
    pub response: usize,
}

impl Default for PayloadSizes {
    fn default() -> Self {
        PayloadSizes {
            header: 128,
            proposal: 512,
            response: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endorsement<G: Group> {
    Mems(Signature<G>),
    Individual(Vec<Signature<G>>),
}

impl<G: Group> Endorsement<G> {
    pub fn mode(&self) -> Mode {
        match self {
            Endorsement::Mems(_) => Mode::Mems,
            Endorsement::Individual(_) => Mode::Individual,
        }
    }

    pub fn encoded_len(&self, g: &G) -> usize {
        let one = g.element_len() + g.scalar_len();
        match self {
            Endorsement::Mems(_) => one,
            Endorsement::Individual(sigs) => one * sigs.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction<G: Group> {
    pub header: Vec<u8>,
    pub client_signature: Signature<G>,
    pub proposal: Vec<u8>,
    pub response: Vec<u8>,
    /// Endorser public keys in roster order.
    pub endorsers: Vec<G::Element>,
    pub endorsement: Endorsement<G>,
}

/// Byte sizes of the sections of a transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TxSizes {
    pub header: usize,
    pub client_signature: usize,
    pub proposal: usize,
    pub response: usize,
    pub identities: usize,
    pub endorsement: usize,
}

impl TxSizes {
    pub fn total(&self) -> usize {
        self.header
            + self.client_signature
            + self.proposal
            + self.response
            + self.identities
            + self.endorsement
    }
}

impl<G: Group> Transaction<G> {
    pub fn sizes(&self, g: &G) -> TxSizes {
        TxSizes {
            header: self.header.len(),
            client_signature: g.element_len() + g.scalar_len(),
            proposal: self.proposal.len(),
            response: self.response.len(),
            identities: self.endorsers.len() * g.element_len(),
            endorsement: self.endorsement.encoded_len(g),
        }
    }

    /// What the endorsers sign.
    pub fn endorsed_bytes(&self) -> Vec<u8> {
        endorsed_bytes(&self.proposal, &self.response)
    }
}

fn endorsed_bytes(proposal: &[u8], response: &[u8]) -> Vec<u8> {
    let mut m = (proposal.len() as u64).to_be_bytes().to_vec();
    m.extend_from_slice(proposal);
    m.extend_from_slice(response);
    m
}

fn client_bytes(header: &[u8], proposal: &[u8]) -> Vec<u8> {
    let mut m = (header.len() as u64).to_be_bytes().to_vec();
    m.extend_from_slice(header);
    m.extend_from_slice(proposal);
    m
}

/// `(client signature + endorsement) / total`, in bytes.
pub fn signature_proportion(sizes: &TxSizes) -> Result<f64> {
    match sizes.total() {
        0 => Err(BenchError::Invalid("empty transaction".into())),
        total => Ok((sizes.client_signature + sizes.endorsement) as f64 / total as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block<G: Group> {
    pub transactions: Vec<Transaction<G>>,
}

/// A client and a fixed endorser set.
#[derive(Debug, Clone)]
pub struct Channel<G: Group> {
    pub client: KeyPair<G>,
    pub endorsers: Vec<KeyPair<G>>,
    pub roster: Roster<G>,
}

impl<G: Group> Channel<G> {
    pub fn generate<R: RngCore + ?Sized>(
        params: &Params<G>,
        n: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let client = KeyPair::generate(params, rng);
        let endorsers: Vec<_> = (0..n).map(|_| KeyPair::generate(params, rng)).collect();
        let roster = Roster::new(endorsers.iter().map(|k| *k.public()).collect())?;
        Ok(Channel {
            client,
            endorsers,
            roster,
        })
    }
}

fn random_bytes<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Vec<u8> {
    let mut b = vec![0; len];
    rng.fill_bytes(&mut b);
    b
}

/// Builds one transaction: the client signs its proposal, then every
/// endorser signs the response. In `mems` mode the endorsers run
/// concurrently against `coordinator`.
pub fn run_endorsement<G: Group, R: RngCore + ?Sized>(
    channel: &Channel<G>,
    mode: Mode,
    coordinator: &Coordinator<G>,
    sizes: PayloadSizes,
    rng: &mut R,
) -> Result<Transaction<G>> {
    let params = coordinator.params();
    let header = random_bytes(sizes.header, rng);
    let proposal = random_bytes(sizes.proposal, rng);
    let response = random_bytes(sizes.response, rng);
    let client_signature = schnorr::sign(
        params,
        &channel.client,
        &client_bytes(&header, &proposal),
        rng,
    );
    let m = endorsed_bytes(&proposal, &response);
    let endorsement = match mode {
        Mode::Individual => Endorsement::Individual(
            channel
                .endorsers
                .iter()
                .map(|k| schnorr::sign(params, k, &m, rng))
                .collect(),
        ),
        Mode::Mems => Endorsement::Mems(mems_endorse(coordinator, channel, &m, rng)?),
    };
    Ok(Transaction {
        header,
        client_signature,
        proposal,
        response,
        endorsers: channel.roster.keys().to_vec(),
        endorsement,
    })
}

fn mems_endorse<G: Group, R: RngCore + ?Sized>(
    coordinator: &Coordinator<G>,
    channel: &Channel<G>,
    m: &[u8],
    rng: &mut R,
) -> Result<Signature<G>> {
    let params = coordinator.params();
    let agg = aggregate(params, &channel.roster);
    let id = coordinator.create_session(channel.roster.clone(), m)?;
    let seeds: Vec<u64> = channel.endorsers.iter().map(|_| rng.next_u64()).collect();
    let results: Vec<Result<Signature<G>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = channel
            .endorsers
            .iter()
            .zip(seeds)
            .enumerate()
            .map(|(slot, (kp, seed))| {
                let agg = &agg;
                scope.spawn(move || -> Result<Signature<G>> {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    let mut s = SignerSession::new(params, *kp, &channel.roster, slot, m)?;
                    coordinator.submit_commitment(id, slot, s.sign_round1(&mut rng)?)?;
                    let bundle = coordinator.wait_round1(id, WAIT)?;
                    coordinator.submit_partial(id, slot, s.sign_round2(&bundle, agg)?)?;
                    let partials = coordinator.wait_partials(id, WAIT)?;
                    Ok(s.finalize(&partials)?)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("endorser thread panicked"))
            .collect()
    });
    let mut sigs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let first = sigs.swap_remove(0);
    if sigs
        .iter()
        .any(|s| s.commitment != first.commitment || s.s != first.s)
    {
        return Err(BenchError::Invalid(
            "endorsers disagree on the joint signature".into(),
        ));
    }
    Ok(first)
}

/// Committer check of one endorsement. `mems` mode aggregates the listed
/// keys and verifies once; `individual` mode verifies every signature.
pub fn verify_endorsement<G: Group>(params: &Params<G>, tx: &Transaction<G>) -> Result<bool> {
    let m = tx.endorsed_bytes();
    Ok(match &tx.endorsement {
        Endorsement::Mems(sig) => {
            let agg = aggregate(params, &Roster::new(tx.endorsers.clone())?);
            verify(params, &agg.key, &m, sig)
        }
        Endorsement::Individual(sigs) => {
            sigs.len() == tx.endorsers.len()
                && sigs
                    .iter()
                    .zip(&tx.endorsers)
                    .all(|(s, pk)| schnorr::verify(params, pk, &m, s))
        }
    })
}

pub fn verify_client<G: Group>(
    params: &Params<G>,
    client: &G::Element,
    tx: &Transaction<G>,
) -> bool {
    schnorr::verify(
        params,
        client,
        &client_bytes(&tx.header, &tx.proposal),
        &tx.client_signature,
    )
}

pub fn verify_block<G: Group>(params: &Params<G>, block: &Block<G>) -> Result<bool> {
    for tx in &block.transactions {
        if !verify_endorsement(params, tx)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Median wall time of verifying every endorsement in `block`.
pub fn verify_block_time<G: Group>(
    params: &Params<G>,
    block: &Block<G>,
    reps: usize,
) -> Result<u64> {
    if reps == 0 {
        return Err(BenchError::Invalid("reps must be positive".into()));
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let ok = verify_block(params, block)?;
        samples.push(start.elapsed().as_nanos() as u64);
        if !ok {
            return Err(BenchError::Invalid(
                "block contains an invalid endorsement".into(),
            ));
        }
    }
    Ok(summarize(&samples).1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndorseRecord {
    pub mode: Mode,
    pub n: usize,
    pub tx_bytes: usize,
    pub sig_proportion: f64,
    pub block_verify_ns: u64,
}

pub const ENDORSE_CSV_HEADER: &str = "mode,n,tx_bytes,sig_proportion,block_verify_ns";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub ns: Vec<usize>,
    pub modes: Vec<Mode>,
    pub sizes: PayloadSizes,
    pub block_size: usize,
    pub reps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            ns: (2..=64).collect(),
            modes: Mode::ALL.to_vec(),
            sizes: PayloadSizes::default(),
            block_size: 4,
            reps: 5,
        }
    }
}

/// One record per `(mode, n)`, ordered by mode then `n`. For each `n` the
/// blocks of every mode are built first; verification reps then alternate
/// between modes on the calling thread.
pub fn simulate<G: Group, R: RngCore + ?Sized>(
    coordinator: &Coordinator<G>,
    config: &SimConfig,
    rng: &mut R,
) -> Result<Vec<EndorseRecord>> {
    if config.block_size == 0 || config.reps == 0 {
        return Err(BenchError::Invalid(
            "block size and reps must be positive".into(),
        ));
    }
    let params = coordinator.params();
    let g = &params.group;
    let mut out = Vec::new();
    for &n in &config.ns {
        if n == 0 {
            return Err(BenchError::Invalid("need at least one endorser".into()));
        }
        let channel = Channel::generate(params, n, rng)?;
        let blocks = config
            .modes
            .iter()
            .map(|&mode| {
                let transactions = (0..config.block_size)
                    .map(|_| run_endorsement(&channel, mode, coordinator, config.sizes, rng))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Block { transactions })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut samples = vec![Vec::with_capacity(config.reps); blocks.len()];
        for _ in 0..config.reps {
            for (block, s) in blocks.iter().zip(&mut samples) {
                s.push(verify_block_time(params, block, 1)?);
            }
        }
        for ((&mode, block), s) in config.modes.iter().zip(&blocks).zip(&samples) {
            let sizes = block.transactions[0].sizes(g);
            out.push(EndorseRecord {
                mode,
                n,
                tx_bytes: sizes.total(),
                sig_proportion: signature_proportion(&sizes)?,
                block_verify_ns: summarize(s).1,
            });
        }
    }
    let order = |m: Mode| config.modes.iter().position(|&x| x == m);
    out.sort_by_key(|r| (order(r.mode), r.n));
    Ok(out)
}

pub fn write_endorse_csv<W: std::io::Write>(records: &[EndorseRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(ENDORSE_CSV_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
