//! Running the k-sum playbook against the coordinator.
//!
//! The attack needs challenge values that depend on the adversary's
//! commitment before it commits. Under MEMS the challenge depends on `W`,
//! which the coordinator withholds until every commitment is frozen, so the
//! candidate lists cannot be filled (step 2 of the playbook).

use std::time::Duration;

use mems_core::group::Group;
use mems_core::mems::{aggregate, verify, KeyPair, Roster, Signature, SignerSession};
use mems_core::oracles::{h1, Params};
use mems_ptp::{Coordinator, ErrorCode, Phase, PtpError, SessionId};
use rand::{Rng, RngCore};
use serde::Serialize;

use crate::AttackError;

pub const STEP2_BLOCKED: &str =
    "step 2 blocked: challenge depends on w, withheld until commitment frozen";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MemsAttemptReport {
    pub k: usize,
    pub sessions: usize,
    /// Probes for `(t, w, W)` made before the adversary's commitment was accepted.
    pub probes: u64,
    /// Probes that returned `(t, w, W)` early. Anything but 0 is a break.
    pub early_observations: u64,
    pub replacement_attempts: u64,
    pub replacement_rejections: u64,
    /// 2 when the candidate lists could not be built.
    pub blocked_step: Option<u8>,
    pub explanation: String,
    /// Sessions finished with the adversary behaving honestly.
    pub completed_sessions: usize,
    /// Every completed session produced a verifying signature.
    pub signatures_verify: bool,
    /// The combined transcript does not yield a signature on a fresh message.
    pub naive_forgery_verifies: bool,
}

fn honest_commit<G: Group>(
    c: &Coordinator<G>,
    id: SessionId,
    s: &mut SignerSession<G>,
    slot: usize,
    rng: &mut impl RngCore,
) -> Result<(), AttackError> {
    let r = s.sign_round1(rng)?;
    c.submit_commitment(id, slot, r)?;
    Ok(())
}

/// Runs `k−1` sessions where the adversary holds the last roster slot.
/// Before committing in each session the adversary probes for the round-one
/// values `probes_per_session` times while the honest signers commit
/// concurrently.
pub fn ksum_attempt_vs_mems<G: Group, R: RngCore + ?Sized>(
    coordinator: &Coordinator<G>,
    honest: &[KeyPair<G>],
    adversary: &KeyPair<G>,
    k: usize,
    probes_per_session: u64,
    rng: &mut R,
) -> Result<MemsAttemptReport, AttackError> {
    if k < 2 || honest.is_empty() {
        return Err(AttackError::Precondition(
            "need k >= 2 and at least one honest signer".into(),
        ));
    }
    let params = coordinator.params();
    let g = &params.group;
    let mut keys: Vec<_> = honest.iter().map(|h| *h.public()).collect();
    keys.push(*adversary.public());
    let roster = Roster::new(keys)?;
    let adv_slot = honest.len();
    let agg = aggregate(params, &roster);
    let mut report = MemsAttemptReport {
        k,
        sessions: k - 1,
        signatures_verify: true,
        ..Default::default()
    };
    let mut sigs: Vec<Signature<G>> = Vec::new();

    for j in 0..k - 1 {
        let m = format!("query-{j}").into_bytes();
        let id = coordinator.create_session(roster.clone(), &m)?;
        let mut signers: Vec<_> = honest
            .iter()
            .enumerate()
            .map(|(i, h)| SignerSession::new(params, *h, &roster, i, &m))
            .collect::<Result<_, _>>()?;
        let mut adv = SignerSession::new(params, *adversary, &roster, adv_slot, &m)?;
        let seeds: Vec<u64> = (0..honest.len()).map(|_| rng.next_u64()).collect();

        // honest signers commit on their own threads while the adversary probes
        let (probes, early) = std::thread::scope(|scope| -> Result<(u64, u64), AttackError> {
            for (i, (s, seed)) in signers.iter_mut().zip(&seeds).enumerate() {
                scope.spawn(move || {
                    let mut rng = <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(*seed);
                    std::thread::sleep(Duration::from_micros(rng.gen_range(0..200)));
                    honest_commit(coordinator, id, s, i, &mut rng)
                });
            }
            let mut early = 0;
            for _ in 0..probes_per_session {
                match coordinator.round1_bundle(id) {
                    Ok(_) => early += 1,
                    Err(PtpError {
                        code: ErrorCode::Unavailable,
                        ..
                    }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            Ok((probes_per_session, early))
        })?;
        report.probes += probes;
        report.early_observations += early;

        // with nothing to compute candidates from, the adversary commits
        let r_adv = adv.sign_round1(rng)?;
        coordinator.submit_commitment(id, adv_slot, r_adv)?;
        let bundle = coordinator.wait_round1(id, Duration::from_secs(30))?;

        // now that c is computable, try to swap in a different commitment
        let replacement = g.exp_g(&g.random_scalar(rng));
        report.replacement_attempts += 1;
        match coordinator.submit_commitment(id, adv_slot, replacement) {
            Err(PtpError {
                code: ErrorCode::Frozen,
                ..
            }) => report.replacement_rejections += 1,
            Err(e) => return Err(e.into()),
            Ok(_) => {}
        }

        // finish the session honestly
        for (i, s) in signers.iter_mut().enumerate() {
            coordinator.submit_partial(id, i, s.sign_round2(&bundle, &agg)?)?;
        }
        coordinator.submit_partial(id, adv_slot, adv.sign_round2(&bundle, &agg)?)?;
        let partials = coordinator.wait_partials(id, Duration::from_secs(30))?;
        let sig = adv.finalize(&partials)?;
        report.signatures_verify &= verify(params, &agg.key, &m, &sig);
        if coordinator.phase(id)? == Phase::Completed {
            report.completed_sessions += 1;
        }
        sigs.push(sig);
    }

    if report.early_observations == 0
        && report.replacement_rejections == report.replacement_attempts
    {
        report.blocked_step = Some(2);
        report.explanation = STEP2_BLOCKED.to_string();
    } else {
        report.explanation =
            "coordinator leaked round-one values or accepted a replacement".to_string();
    }

    // combining the sessions the way the insecure-scheme forgery does
    let mut fresh = b"forged-".to_vec();
    fresh.extend(hex::encode(rng.next_u64().to_be_bytes()).into_bytes());
    let combined = Signature {
        commitment: g.product(sigs.iter().map(|s| &s.commitment)),
        s: g.scalar_sum(sigs.iter().map(|s| &s.s)),
    };
    report.naive_forgery_verifies = verify(params, &agg.key, &fresh, &combined);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GuessReport {
    pub strict_timestamp: bool,
    pub window_ms: u64,
    pub candidates: u64,
    /// Offset of the matching guess from the adversary's clock reading.
    pub matched_offset_ms: Option<i64>,
}

/// The adversary commits last, reading its own clock just before. It then
/// enumerates every `t` within `±window_ms` and checks each `W = g^{H1(t)}`
/// against the released one. With a bare timestamp one guess matches, so
/// `w` was predictable before commitment; the nonce suffix prevents this.
pub fn timestamp_guessing<G: Group, R: RngCore + ?Sized>(
    coordinator: &Coordinator<G>,
    honest: &KeyPair<G>,
    adversary: &KeyPair<G>,
    window_ms: u64,
    clock: impl Fn() -> u64,
    rng: &mut R,
) -> Result<GuessReport, AttackError> {
    let params: &Params<G> = coordinator.params();
    let g = &params.group;
    let roster = Roster::new(vec![*honest.public(), *adversary.public()])?;
    let id = coordinator.create_session(roster.clone(), b"guess")?;
    let mut h = SignerSession::new(params, *honest, &roster, 0, b"guess")?;
    let mut a = SignerSession::new(params, *adversary, &roster, 1, b"guess")?;
    coordinator.submit_commitment(id, 0, h.sign_round1(rng)?)?;
    let center = clock();
    coordinator.submit_commitment(id, 1, a.sign_round1(rng)?)?;
    let released = coordinator.round1_bundle(id)?.offset_commitment;
    let mut matched = None;
    let mut candidates = 0;
    for off in -(window_ms as i64)..=window_ms as i64 {
        candidates += 1;
        let t = (center as i64 + off).max(0) as u64;
        let w = h1(params, &t.to_be_bytes())?;
        if g.exp_uncounted(&g.generator(), &w) == released {
            matched = Some(off);
            break;
        }
    }
    Ok(GuessReport {
        strict_timestamp: coordinator.config().strict_timestamp,
        window_ms,
        candidates: if matched.is_some() {
            candidates
        } else {
            2 * window_ms + 1
        },
        matched_offset_ms: matched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mems_core::group::ToyGroup;
    use mems_ptp::coordinator::system_clock;
    use mems_ptp::PtpConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn parties(
        seed: u64,
    ) -> (
        Params<ToyGroup>,
        KeyPair<ToyGroup>,
        KeyPair<ToyGroup>,
        ChaCha20Rng,
    ) {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let h = KeyPair::generate(&params, &mut rng);
        let a = KeyPair::generate(&params, &mut rng);
        (params, h, a, rng)
    }

    #[test]
    fn step_two_blocked_for_n2_k4() {
        let (params, h, a, mut rng) = parties(0);
        let c = Coordinator::new(params, PtpConfig::default());
        let r = ksum_attempt_vs_mems(&c, &[h], &a, 4, 200, &mut rng).unwrap();
        assert_eq!(r.blocked_step, Some(2));
        assert_eq!(r.explanation, STEP2_BLOCKED);
        assert_eq!(r.early_observations, 0);
        assert_eq!(r.replacement_rejections, 3);
        assert_eq!(r.completed_sessions, 3);
        assert!(r.signatures_verify);
        assert!(!r.naive_forgery_verifies);
    }

    #[test]
    fn strict_timestamp_is_guessable() {
        let (params, h, a, mut rng) = parties(1);
        let c = Coordinator::new(
            params,
            PtpConfig {
                strict_timestamp: true,
                ..Default::default()
            },
        );
        let clock = system_clock();
        let r = timestamp_guessing(&c, &h, &a, 1000, || clock(), &mut rng).unwrap();
        assert!(r.matched_offset_ms.is_some(), "{r:?}");
    }

    #[test]
    fn nonce_suffix_defeats_guessing() {
        let (params, h, a, mut rng) = parties(2);
        let c = Coordinator::new(params, PtpConfig::default());
        let clock = system_clock();
        let r = timestamp_guessing(&c, &h, &a, 1000, || clock(), &mut rng).unwrap();
        assert_eq!(r.matched_offset_ms, None);
        assert_eq!(r.candidates, 2001);
    }
}
