//! k-sum forgery against the single-commitment two-round scheme.
//!
//! The adversary controls slot 1 of a two-key roster and talks to an honest
//! signer at slot 0. It opens `k−1` sessions, then for each session tabulates
//! challenges over many candidate commitments of its own, tabulates the
//! challenge of the target product commitment over many fresh messages, and
//! searches for one candidate per list with `c^(1) + … + c^(k−1) = c*`. The
//! honest partials for the chosen sessions then add up to a signature on the
//! fresh message.

use std::time::Instant;

use mems_core::baselines::insecure::{insecure_verify, SigningOracle};
use mems_core::group::Group;
use mems_core::mems::{KeyPair, Signature};
use mems_core::oracles::{h2_truncated, Params};
use rand::RngCore;

use crate::wagner::{wagner_solve_with_stats, Entry, KSumInstance, Relation, WagnerConfig};
use crate::AttackError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KSumConfig {
    pub k: usize,
    pub bits: u32,
    pub list_size: usize,
    /// Fresh list draws before giving up.
    pub retries: usize,
    pub max_merged: Option<usize>,
}

impl Default for KSumConfig {
    fn default() -> Self {
        KSumConfig {
            k: 8,
            bits: 16,
            list_size: 256,
            retries: 16,
            max_merged: Some(4096),
        }
    }
}

impl KSumConfig {
    /// `k·2^{b/(1+lg k)}`.
    pub fn predicted_cost(&self) -> f64 {
        let lg_k = (self.k as f64).log2();
        self.k as f64 * 2f64.powf(self.bits as f64 / (1.0 + lg_k))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionTranscript<G: Group> {
    pub session: u64,
    pub message: Vec<u8>,
    pub honest_commitment: G::Element,
    pub adversary_commitment: G::Element,
    pub honest_partial: G::Scalar,
    pub challenge: u64,
}

#[derive(Debug, Clone)]
pub struct ForgeryResult<G: Group> {
    pub message: Vec<u8>,
    pub signature: Signature<G>,
    pub aggregated_key: G::Element,
    pub challenge: u64,
    pub transcript: Vec<SessionTranscript<G>>,
    /// `insecure_verify` on the forgery.
    pub verifies: bool,
    /// The honest oracle never produced a partial on `message`.
    pub fresh: bool,
}

#[derive(Debug, Clone)]
pub struct KSumReport<G: Group> {
    pub config: KSumConfig,
    pub attempts: usize,
    /// Hash evaluations plus merged-list entries, over all attempts.
    pub work: u64,
    pub predicted_cost: f64,
    pub elapsed_ms: u128,
    pub forgery: Option<ForgeryResult<G>>,
    pub failure: Option<String>,
}

impl<G: Group> KSumReport<G> {
    pub fn succeeded(&self) -> bool {
        self.forgery.as_ref().is_some_and(|f| f.verifies && f.fresh)
    }
}

/// Runs the attack. `params` must have truncated challenges of width
/// `config.bits`, and the oracle must have been built with the same params.
pub fn ksum_forge<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    oracle: &SigningOracle<G>,
    adversary: &KeyPair<G>,
    config: KSumConfig,
    rng: &mut R,
) -> Result<KSumReport<G>, AttackError> {
    if params.oracles.challenge_bits() != Some(config.bits) {
        return Err(AttackError::Precondition(format!(
            "challenge oracle must be truncated to {} bits, found {:?}",
            config.bits,
            params.oracles.challenge_bits()
        )));
    }
    if config.k < 2 || !config.k.is_power_of_two() || config.list_size == 0 {
        return Err(AttackError::Precondition(format!(
            "bad k = {} or list size = {}",
            config.k, config.list_size
        )));
    }
    let roster = oracle.roster().keys();
    if roster.len() != 2 || roster[1] != *adversary.public() {
        return Err(AttackError::Precondition(
            "roster must be [honest, adversary]".into(),
        ));
    }
    let g = &params.group;
    let agg = oracle.aggregated_key().clone();
    let start = Instant::now();

    // step 1: k−1 concurrent sessions with the honest signer
    let sessions: Vec<(u64, Vec<u8>, G::Element)> = (0..config.k - 1)
        .map(|j| {
            let m = format!("query-{j}").into_bytes();
            oracle.open(&m, rng).map(|(id, r)| (id, m, r))
        })
        .collect::<Result<_, _>>()?;
    let target_commitment = g.product(sessions.iter().map(|(_, _, r)| r));

    let mut work = 0u64;
    for attempt in 1..=config.retries {
        // steps 2-3: candidate challenges for each session, then for the target
        // an exact sum of k−1 challenges can only hit a b-bit target when the
        // summands are small, so session candidates are filtered by size
        let small = (1u64 << config.bits) / (config.k as u64 - 1);
        let mut draws = 0u64;
        let mut lists: Vec<Vec<Entry<ListTag<G>>>> = sessions
            .iter()
            .map(|(_, m, r1)| {
                let mut list = Vec::with_capacity(config.list_size);
                while list.len() < config.list_size {
                    let big_r2 = g.exp_g(&g.random_scalar(rng));
                    let joint = g.element_mul(r1, &big_r2);
                    let value = h2_truncated(params, &agg.key, &joint, m).expect("attack mode");
                    draws += 1;
                    if value < small {
                        list.push(Entry {
                            value,
                            tag: ListTag::Commitment(big_r2),
                        });
                    }
                }
                list
            })
            .collect();
        lists.push(
            (0..config.list_size)
                .map(|_| {
                    let mut m = b"forged-".to_vec();
                    let mut nonce = [0u8; 16];
                    rng.fill_bytes(&mut nonce);
                    m.extend(hex::encode(nonce).into_bytes());
                    let value = h2_truncated(params, &agg.key, &target_commitment, &m)
                        .expect("attack mode");
                    Entry {
                        value,
                        tag: ListTag::Message(m),
                    }
                })
                .collect(),
        );
        work += draws + config.list_size as u64;
        let inst = KSumInstance::new(config.bits, lists)?;
        // the challenges are later used mod p, so carries matter: demand an exact sum
        let cfg = WagnerConfig {
            relation: Relation::Exact,
            max_merged: config.max_merged,
        };
        let (solution, stats) = wagner_solve_with_stats(&inst, cfg);
        work += stats.work();
        let Some(ix) = solution else {
            log::debug!("attempt {attempt}: no solution, refilling lists");
            continue;
        };

        // step 5: answer every session with the chosen commitment
        let mut transcript = Vec::with_capacity(sessions.len());
        for (j, (id, m, r1)) in sessions.iter().enumerate() {
            let ListTag::Commitment(r2) = inst.entry(j, ix[j]).tag else {
                unreachable!("session lists hold commitments")
            };
            let s1 = oracle.respond(*id, &[*r1, r2])?;
            transcript.push(SessionTranscript {
                session: *id,
                message: m.clone(),
                honest_commitment: *r1,
                adversary_commitment: r2,
                honest_partial: s1,
                challenge: inst.entry(j, ix[j]).value,
            });
        }
        let ListTag::Message(m_star) = &inst.entry(config.k - 1, ix[config.k - 1]).tag else {
            unreachable!("last list holds messages")
        };
        let c_star = inst.entry(config.k - 1, ix[config.k - 1]).value;

        // step 6: s* = Σ s_1^(j) + c*·a_2·x_2
        let honest_sum = g.scalar_sum(transcript.iter().map(|t| &t.honest_partial));
        let own = g.scalar_mul(
            &g.scalar_mul(&g.scalar_from_u64(c_star), &agg.coefficients[1]),
            adversary.secret(),
        );
        let signature = Signature {
            commitment: target_commitment,
            s: g.scalar_add(&honest_sum, &own),
        };
        let verifies = insecure_verify(params, &agg.key, m_star, &signature);
        let fresh = !oracle.signed_messages().iter().any(|m| m == m_star);
        return Ok(KSumReport {
            config,
            attempts: attempt,
            work,
            predicted_cost: config.predicted_cost(),
            elapsed_ms: start.elapsed().as_millis(),
            forgery: Some(ForgeryResult {
                message: m_star.clone(),
                signature,
                aggregated_key: agg.key,
                challenge: c_star,
                transcript,
                verifies,
                fresh,
            }),
            failure: None,
        });
    }
    Ok(KSumReport {
        config,
        attempts: config.retries,
        work,
        predicted_cost: config.predicted_cost(),
        elapsed_ms: start.elapsed().as_millis(),
        forgery: None,
        failure: Some(format!(
            "no {}-sum solution after {} list draws",
            config.k, config.retries
        )),
    })
}

#[derive(Debug, Clone)]
enum ListTag<G: Group> {
    Commitment(G::Element),
    Message(Vec<u8>),
}

/// Builds the attack-mode parameters, the honest oracle and the adversary key.
pub fn setup<G: Group, R: RngCore + ?Sized>(
    group: G,
    bits: u32,
    rng: &mut R,
) -> Result<(Params<G>, SigningOracle<G>, KeyPair<G>), AttackError> {
    let oracles = mems_core::oracles::OracleConfig::default().with_challenge_bits(bits);
    let params = Params::with_oracles(group, oracles)?;
    let honest = KeyPair::generate(&params, rng);
    let adversary = KeyPair::generate(&params, rng);
    let roster = mems_core::mems::Roster::new(vec![*honest.public(), *adversary.public()])?;
    let oracle = SigningOracle::new(&params, honest, roster, 0)?;
    Ok((params, oracle, adversary))
}
