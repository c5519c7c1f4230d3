//! Per-signer sign cost, verify cost, aggregation cost and message counts.
//!
//! Only the measured signer's own computation is timed. Other signers'
//! commitments and the coordinator's release are prepared outside the
//! timed regions.

use std::time::Instant;

use mems_core::baselines::{
    simulated_broadcast_message_count, InsecureSession, Scheme, VectorSignerSession, DEFAULT_V,
};
use mems_core::group::Group;
use mems_core::instrument::count_exps;
use mems_core::mems::{
    aggregate, AggregatedKey, KeyPair, Roster, Round1Bundle, Signature, SignerSession,
};
use mems_core::oracles::{h1, Params};
use mems_core::schnorr;
use mems_ptp::{Coordinator, PtpConfig};
use rand::RngCore;

use crate::{summarize, BenchError, BenchRecord, Op, Result, MIN_REPS};

const MESSAGE: &[u8] = b"benchmark message";

/// `count` distinct elements `h, h², h³, …` for a random `h`, built with
/// multiplications only.
fn filler<G: Group, R: RngCore + ?Sized>(g: &G, count: usize, rng: &mut R) -> Vec<G::Element> {
    let h = g.exp_uncounted(&g.generator(), &g.random_scalar(rng));
    let mut cur = h;
    (0..count)
        .map(|_| {
            let e = cur;
            cur = g.element_mul(&cur, &h);
            e
        })
        .collect()
}

fn check_args(n: usize, reps: usize) -> Result<()> {
    if n == 0 {
        return Err(BenchError::Invalid("n must be at least 1".into()));
    }
    if reps < MIN_REPS {
        return Err(BenchError::Invalid(format!(
            "reps must be at least {MIN_REPS}, got {reps}"
        )));
    }
    Ok(())
}

/// Roster with the measured signer in slot 0 and filler keys elsewhere.
fn roster_for<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    n: usize,
    rng: &mut R,
) -> Result<(KeyPair<G>, Roster<G>, AggregatedKey<G>)> {
    let kp = KeyPair::generate(params, rng);
    let mut keys = vec![*kp.public()];
    keys.extend(filler(&params.group, n - 1, rng));
    let roster = Roster::new(keys)?;
    let agg = aggregate(params, &roster);
    Ok((kp, roster, agg))
}

fn record(scheme: Scheme, n: usize, op: Op, samples: &[u64], exps: u64, msgs: u64) -> BenchRecord {
    let (mean_ns, median_ns) = summarize(samples);
    BenchRecord {
        scheme,
        n,
        op,
        reps: samples.len(),
        mean_ns,
        median_ns,
        exp_count: exps,
        msg_count: msgs,
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, u64, u64) {
    let start = Instant::now();
    let (out, exps) = count_exps(f);
    (out, start.elapsed().as_nanos() as u64, exps)
}

/// One signer's computation over both rounds for a roster of `n`.
pub fn bench_sign<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    scheme: Scheme,
    n: usize,
    reps: usize,
    rng: &mut R,
) -> Result<BenchRecord> {
    check_args(n, reps)?;
    let g = &params.group;
    let (kp, roster, agg) = roster_for(params, n, rng)?;
    let mut samples = Vec::with_capacity(reps);
    let mut exps = 0;
    match scheme {
        Scheme::Mems => {
            let others = filler(g, n - 1, rng);
            let t = 1_700_000_000_000u64.to_be_bytes().to_vec();
            let w = h1(params, &t)?;
            let big_w = g.exp_uncounted(&g.generator(), &w);
            for _ in 0..reps {
                let (r1, ns1, e1) = timed(|| -> Result<_> {
                    let mut s = SignerSession::new(params, kp, &roster, 0, MESSAGE)?;
                    let r = s.sign_round1(rng)?;
                    Ok((s, r))
                });
                let (mut s, r) = r1?;
                let mut commitments = Vec::with_capacity(n);
                commitments.push(r);
                commitments.extend_from_slice(&others);
                let bundle = Round1Bundle {
                    commitments,
                    timestamp: t.clone(),
                    offset: w,
                    offset_commitment: big_w,
                };
                let (r2, ns2, e2) = timed(|| s.sign_round2(&bundle, &agg));
                r2?;
                samples.push(ns1 + ns2);
                exps = e1 + e2;
            }
        }
        Scheme::MuSig2 => {
            let others: Vec<Vec<G::Element>> = filler(g, (n - 1) * DEFAULT_V, rng)
                .chunks(DEFAULT_V)
                .map(<[_]>::to_vec)
                .collect();
            for _ in 0..reps {
                let (r1, ns1, e1) = timed(|| -> Result<_> {
                    let mut s =
                        VectorSignerSession::new(params, kp, &roster, 0, MESSAGE, DEFAULT_V)?;
                    let r = s.sign_round1(rng)?;
                    Ok((s, r))
                });
                let (mut s, r) = r1?;
                let mut vectors = Vec::with_capacity(n);
                vectors.push(r);
                vectors.extend(others.iter().cloned());
                let (r2, ns2, e2) = timed(|| s.sign_round2(&vectors, &agg));
                r2?;
                samples.push(ns1 + ns2);
                exps = e1 + e2;
            }
        }
        Scheme::Insecure => {
            let others = filler(g, n - 1, rng);
            for _ in 0..reps {
                let (r1, ns1, e1) = timed(|| -> Result<_> {
                    let mut s = InsecureSession::new(params, kp, &roster, 0, MESSAGE)?;
                    let r = s.sign_round1(rng)?;
                    Ok((s, r))
                });
                let (mut s, r) = r1?;
                let mut commitments = Vec::with_capacity(n);
                commitments.push(r);
                commitments.extend_from_slice(&others);
                let (r2, ns2, e2) = timed(|| s.sign_round2(&commitments, &agg));
                r2?;
                samples.push(ns1 + ns2);
                exps = e1 + e2;
            }
        }
    }
    Ok(record(scheme, n, Op::Sign, &samples, exps, 0))
}

/// A valid `(U, s)` under the aggregate of `n` fresh keys, made by signing
/// with `Σ a_i·x_i`. Every scheme here shares the verification equation.
fn aggregate_signature<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    n: usize,
    rng: &mut R,
) -> Result<(AggregatedKey<G>, Signature<G>)> {
    let g = &params.group;
    let keys: Vec<_> = (0..n).map(|_| KeyPair::generate(params, rng)).collect();
    let roster = Roster::new(keys.iter().map(|k| *k.public()).collect())?;
    let agg = aggregate(params, &roster);
    let secret = keys
        .iter()
        .zip(&agg.coefficients)
        .fold(g.scalar_zero(), |acc, (k, a)| {
            g.scalar_add(&acc, &g.scalar_mul(a, k.secret()))
        });
    let sig = schnorr::sign_with_secret(params, &secret, &agg.key, MESSAGE, rng);
    Ok((agg, sig))
}

/// Verification of one joint signature, aggregation excluded.
pub fn bench_verify<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    scheme: Scheme,
    n: usize,
    reps: usize,
    rng: &mut R,
) -> Result<BenchRecord> {
    check_args(n, reps)?;
    let (agg, sig) = aggregate_signature(params, n, rng)?;
    let verify = match scheme {
        Scheme::Mems => mems_core::mems::verify::<G>,
        Scheme::MuSig2 => mems_core::baselines::musig2_verify::<G>,
        Scheme::Insecure => mems_core::baselines::insecure_verify::<G>,
    };
    let mut samples = Vec::with_capacity(reps);
    let mut exps = 0;
    for _ in 0..reps {
        let (ok, ns, e) = timed(|| verify(params, &agg.key, MESSAGE, &sig));
        if !ok {
            return Err(BenchError::Invalid(format!(
                "{scheme} signature failed to verify at n = {n}"
            )));
        }
        samples.push(ns);
        exps = e;
    }
    Ok(record(scheme, n, Op::Verify, &samples, exps, 0))
}

/// Key aggregation over `n` keys. All three schemes aggregate the same way.
pub fn bench_agg<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    scheme: Scheme,
    n: usize,
    reps: usize,
    rng: &mut R,
) -> Result<BenchRecord> {
    check_args(n, reps)?;
    let roster = Roster::new(filler(&params.group, n, rng))?;
    let mut samples = Vec::with_capacity(reps);
    let mut exps = 0;
    for _ in 0..reps {
        let (_, ns, e) = timed(|| aggregate(params, &roster));
        samples.push(ns);
        exps = e;
    }
    Ok(record(scheme, n, Op::Agg, &samples, exps, 0))
}

/// Messages exchanged in one complete session. MEMS runs a real in-process
/// coordinator session; the peer-to-peer schemes use the broadcast formula.
pub fn bench_messages<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    scheme: Scheme,
    n: usize,
    rng: &mut R,
) -> Result<BenchRecord> {
    let msgs = match scheme {
        Scheme::Mems => mems_session_messages(params, n, rng)?,
        other => simulated_broadcast_message_count(other, n)?,
    };
    Ok(BenchRecord {
        scheme,
        n,
        op: Op::Messages,
        reps: 1,
        mean_ns: 0,
        median_ns: 0,
        exp_count: 0,
        msg_count: msgs,
    })
}

fn mems_session_messages<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    n: usize,
    rng: &mut R,
) -> Result<u64> {
    if n == 0 {
        return Err(BenchError::Invalid("n must be at least 1".into()));
    }
    let coordinator = Coordinator::new(params.clone(), PtpConfig::default());
    let keys: Vec<_> = (0..n).map(|_| KeyPair::generate(params, rng)).collect();
    let roster = Roster::new(keys.iter().map(|k| *k.public()).collect())?;
    let agg = aggregate(params, &roster);
    let id = coordinator.create_session(roster.clone(), MESSAGE)?;
    let mut sessions = keys
        .iter()
        .enumerate()
        .map(|(i, k)| SignerSession::new(params, *k, &roster, i, MESSAGE))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    for (i, s) in sessions.iter_mut().enumerate() {
        coordinator.submit_commitment(id, i, s.sign_round1(rng)?)?;
    }
    let bundle = coordinator.round1_bundle(id)?;
    for (i, s) in sessions.iter_mut().enumerate() {
        coordinator.submit_partial(id, i, s.sign_round2(&bundle, &agg)?)?;
    }
    let sig = sessions[0].finalize(&coordinator.partials(id)?)?;
    if !mems_core::mems::verify(params, &agg.key, MESSAGE, &sig) {
        return Err(BenchError::Invalid(
            "coordinated session produced an invalid signature".into(),
        ));
    }
    Ok(coordinator.message_count(id)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub schemes: Vec<Scheme>,
    pub ns: Vec<usize>,
    pub reps: usize,
}

/// Sign, verify, agg and message records for every scheme and `n`.
pub fn bench_grid<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    spec: &GridSpec,
    rng: &mut R,
) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &scheme in &spec.schemes {
        for &n in &spec.ns {
            out.push(bench_sign(params, scheme, n, spec.reps, rng)?);
            out.push(bench_verify(params, scheme, n, spec.reps, rng)?);
            out.push(bench_agg(params, scheme, n, spec.reps, rng)?);
            out.push(bench_messages(params, scheme, n, rng)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mems_core::group::{Ristretto, ToyGroup};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn exp_counts_match_cost_model() {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        for n in [1, 2, 7, 50] {
            assert_eq!(
                bench_sign(&params, Scheme::Mems, n, 10, &mut rng)
                    .unwrap()
                    .exp_count,
                1
            );
            assert_eq!(
                bench_sign(&params, Scheme::MuSig2, n, 10, &mut rng)
                    .unwrap()
                    .exp_count,
                7
            );
            assert_eq!(
                bench_sign(&params, Scheme::Insecure, n, 10, &mut rng)
                    .unwrap()
                    .exp_count,
                1
            );
            for s in Scheme::ALL {
                assert_eq!(
                    bench_verify(&params, s, n, 10, &mut rng).unwrap().exp_count,
                    2
                );
                assert_eq!(
                    bench_agg(&params, s, n, 10, &mut rng).unwrap().exp_count,
                    n as u64
                );
            }
        }
    }

    #[test]
    fn message_counts() {
        let params = Params::new(Ristretto);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert_eq!(
            bench_messages(&params, Scheme::Mems, 10, &mut rng)
                .unwrap()
                .msg_count,
            50
        );
        assert_eq!(
            bench_messages(&params, Scheme::MuSig2, 10, &mut rng)
                .unwrap()
                .msg_count,
            360
        );
    }

    #[test]
    fn rejects_too_few_reps() {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        assert!(bench_sign(&params, Scheme::Mems, 4, 9, &mut rng).is_err());
        assert!(bench_verify(&params, Scheme::Mems, 0, 10, &mut rng).is_err());
    }

    #[test]
    fn grid_shape() {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let spec = GridSpec {
            schemes: vec![Scheme::Mems, Scheme::MuSig2],
            ns: vec![2, 5],
            reps: 10,
        };
        let recs = bench_grid(&params, &spec, &mut rng).unwrap();
        assert_eq!(recs.len(), 16);
        assert!(recs.iter().all(|r| r.op == Op::Messages || r.reps == 10));
    }
}
