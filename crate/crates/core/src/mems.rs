//! The MEMS two-round multi-signature.
//!
//! Signers never talk to each other. In round one each signer sends its
//! commitment `R_i = g^{r_i}` to the coordinator, which waits for all `n`
//! commitments and only then fixes a timestamp `t`, derives `w = H1(t)` and
//! `W = g^w`, and hands `(R_1..R_n, t, w, W)` back to every signer. In round
//! two each signer computes
//!
//! ```text
//! U   = W^n · ∏ R_i
//! c   = H2(X̃, U, m)
//! s_i = w + r_i + c · a_i · x_i   (mod p)
//! ```
//!
//! and the joint signature is `(U, Σ s_i)`, checked as `g^s = U · X̃^c`.
//!
//! A signer performs exactly one instrumented exponentiation (`g^{r_i}`):
//! `W^n` is a power by the small public integer `n`, and `W` itself is taken
//! from the coordinator after checking `w = H1(t)` unless
//! [`SignerConfig::recompute_offset`] is set.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::group::Group;
use crate::oracles::{h0_all, h1, h2, Params};

#[derive(Debug, PartialEq, Eq)]
pub struct KeyPair<G: Group> {
    secret: G::Scalar,
    public: G::Element,
}

impl<G: Group> Clone for KeyPair<G> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<G: Group> Copy for KeyPair<G> {}

impl<G: Group> KeyPair<G> {
    pub fn generate<R: RngCore + ?Sized>(params: &Params<G>, rng: &mut R) -> Self {
        Self::from_secret(params, params.group.random_scalar(rng))
    }

    pub fn from_secret(params: &Params<G>, secret: G::Scalar) -> Self {
        KeyPair {
            secret,
            public: params.group.exp_g(&secret),
        }
    }

    pub fn secret(&self) -> &G::Scalar {
        &self.secret
    }

    pub fn public(&self) -> &G::Element {
        &self.public
    }

    /// `hex(sk) hex(pk)` as stored in key files.
    pub fn to_record(&self, group: &G) -> String {
        format!(
            "{} {}",
            group.scalar_to_hex(&self.secret),
            group.element_to_hex(&self.public)
        )
    }

    /// Parses a key-file record and checks that `pk = g^sk`.
    pub fn from_record(params: &Params<G>, line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace();
        let (Some(sk), Some(pk), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::InvalidEncoding(
                "key record must be `<sk-hex> <pk-hex>`".into(),
            ));
        };
        let g = &params.group;
        let public = g.element_from_hex(pk)?;
        let secret = g.scalar_from_hex(sk)?;
        if g.exp_uncounted(&g.generator(), &secret) != public {
            return Err(Error::InvalidEncoding(
                "public key does not match secret key".into(),
            ));
        }
        Ok(KeyPair { secret, public })
    }
}

/// Ordered list of signer public keys. Duplicates occupy distinct slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster<G: Group> {
    keys: Vec<G::Element>,
}

impl<G: Group> Roster<G> {
    pub fn new(keys: Vec<G::Element>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::EmptyRoster);
        }
        Ok(Roster { keys })
    }

    pub fn keys(&self) -> &[G::Element] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedKey<G: Group> {
    pub key: G::Element,
    /// `a_i = H0(PK, X_i)`, aligned with the roster.
    pub coefficients: Vec<G::Scalar>,
}

/// `X̃ = ∏ X_i^{a_i}`. Costs `n` exponentiations.
pub fn aggregate<G: Group>(params: &Params<G>, roster: &Roster<G>) -> AggregatedKey<G> {
    let g = &params.group;
    let coefficients = h0_all(params, roster.keys());
    let key = g.multi_exp(roster.keys(), &coefficients);
    AggregatedKey { key, coefficients }
}

/// What the coordinator releases once every commitment is in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round1Bundle<G: Group> {
    /// `R_1..R_n` in roster order.
    pub commitments: Vec<G::Element>,
    /// The coordinator's timestamp `t`.
    pub timestamp: Vec<u8>,
    /// `w = H1(t)`.
    pub offset: G::Scalar,
    /// `W = g^w`.
    pub offset_commitment: G::Element,
}

impl<G: Group> Round1Bundle<G> {
    /// Derives `w` and `W` from `t` (one exponentiation).
    pub fn new(
        params: &Params<G>,
        commitments: Vec<G::Element>,
        timestamp: Vec<u8>,
    ) -> Result<Self> {
        let offset = h1(params, &timestamp)?;
        let offset_commitment = params.group.exp_g(&offset);
        Ok(Round1Bundle {
            commitments,
            timestamp,
            offset,
            offset_commitment,
        })
    }

    /// `U = W^n · ∏ R_i`.
    pub fn joint_commitment(&self, group: &G) -> G::Element {
        let wn = group.pow_small(&self.offset_commitment, self.commitments.len() as u64);
        group.element_mul(&wn, &group.product(&self.commitments))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignerPhase {
    Init,
    Committed,
    Finalized,
}

impl SignerPhase {
    fn name(self) -> &'static str {
        match self {
            SignerPhase::Init => "Init",
            SignerPhase::Committed => "Committed",
            SignerPhase::Finalized => "Finalized",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SignerConfig {
    /// Recompute `W = g^w` instead of trusting the coordinator's value.
    /// Costs a second exponentiation.
    pub recompute_offset: bool,
}

#[derive(Debug, PartialEq, Eq)]
pub struct Signature<G: Group> {
    /// Joint commitment `U`.
    pub commitment: G::Element,
    pub s: G::Scalar,
}

impl<G: Group> Clone for Signature<G> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<G: Group> Copy for Signature<G> {}

impl<G: Group> Signature<G> {
    /// `enc(U) ‖ enc(s)`.
    pub fn to_bytes(&self, group: &G) -> Vec<u8> {
        let mut out = group.encode_element(&self.commitment);
        out.extend(group.encode_scalar(&self.s));
        out
    }

    pub fn from_bytes(group: &G, bytes: &[u8]) -> Result<Self> {
        let el = group.element_len();
        if bytes.len() != el + group.scalar_len() {
            return Err(Error::InvalidEncoding(format!(
                "signature must be {} bytes, got {}",
                el + group.scalar_len(),
                bytes.len()
            )));
        }
        Ok(Signature {
            commitment: group.decode_element(&bytes[..el])?,
            s: group.decode_scalar(&bytes[el..])?,
        })
    }

    pub fn to_hex(&self, group: &G) -> String {
        hex::encode(self.to_bytes(group))
    }

    pub fn from_hex(group: &G, s: &str) -> Result<Self> {
        let bytes = hex::decode(s.trim())
            .map_err(|e| Error::InvalidEncoding(format!("signature hex: {e}")))?;
        Self::from_bytes(group, &bytes)
    }
}

/// One signer's view of a signing session.
///
/// The nonce is consumed by round two and cannot be read back.
#[derive(Debug)]
pub struct SignerSession<G: Group> {
    params: Params<G>,
    keypair: KeyPair<G>,
    roster_len: usize,
    index: usize,
    message: Vec<u8>,
    config: SignerConfig,
    phase: SignerPhase,
    nonce: Option<G::Scalar>,
    commitment: Option<G::Element>,
    joint_commitment: Option<G::Element>,
    challenge: Option<G::Scalar>,
}

impl<G: Group> SignerSession<G> {
    pub fn new(
        params: &Params<G>,
        keypair: KeyPair<G>,
        roster: &Roster<G>,
        index: usize,
        message: &[u8],
    ) -> Result<Self> {
        let Some(slot_key) = roster.keys().get(index) else {
            return Err(Error::SlotOutOfRange {
                index,
                len: roster.len(),
            });
        };
        if *slot_key != keypair.public {
            return Err(Error::RosterMismatch(index));
        }
        Ok(SignerSession {
            params: params.clone(),
            keypair,
            roster_len: roster.len(),
            index,
            message: message.to_vec(),
            config: SignerConfig::default(),
            phase: SignerPhase::Init,
            nonce: None,
            commitment: None,
            joint_commitment: None,
            challenge: None,
        })
    }

    pub fn with_config(mut self, config: SignerConfig) -> Self {
        self.config = config;
        self
    }

    pub fn phase(&self) -> SignerPhase {
        self.phase
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn message(&self) -> &[u8] {
        &self.message
    }

    pub fn commitment(&self) -> Option<&G::Element> {
        self.commitment.as_ref()
    }

    /// `U`, available after round two.
    pub fn joint_commitment(&self) -> Option<&G::Element> {
        self.joint_commitment.as_ref()
    }

    /// `c`, available after round two.
    pub fn challenge(&self) -> Option<&G::Scalar> {
        self.challenge.as_ref()
    }

    fn expect_phase(&self, want: SignerPhase, op: &'static str) -> Result<()> {
        if self.phase != want {
            return Err(Error::Phase {
                op,
                phase: self.phase.name(),
            });
        }
        Ok(())
    }

    fn commit(&mut self, nonce: G::Scalar) -> Result<G::Element> {
        self.expect_phase(SignerPhase::Init, "sign_round1")?;
        let r_point = self.params.group.exp_g(&nonce);
        self.nonce = Some(nonce);
        self.commitment = Some(r_point);
        self.phase = SignerPhase::Committed;
        Ok(r_point)
    }

    /// Round one: draws `r_i` and returns `R_i = g^{r_i}`.
    pub fn sign_round1<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<G::Element> {
        let nonce = self.params.group.random_scalar(rng);
        self.commit(nonce)
    }

    #[cfg(any(test, feature = "test-hooks"))]
    pub fn sign_round1_with_nonce(&mut self, nonce: G::Scalar) -> Result<G::Element> {
        self.commit(nonce)
    }

    #[cfg(any(test, feature = "test-hooks"))]
    pub fn nonce(&self) -> Option<G::Scalar> {
        self.nonce
    }

    /// Round two: checks the bundle and returns the partial signature `s_i`.
    pub fn sign_round2(
        &mut self,
        bundle: &Round1Bundle<G>,
        agg: &AggregatedKey<G>,
    ) -> Result<G::Scalar> {
        self.expect_phase(SignerPhase::Committed, "sign_round2")?;
        let g = &self.params.group;
        let n = self.roster_len;
        if bundle.commitments.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: bundle.commitments.len(),
            });
        }
        if agg.coefficients.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: agg.coefficients.len(),
            });
        }
        if Some(&bundle.commitments[self.index]) != self.commitment.as_ref() {
            return Err(Error::CommitmentMismatch(self.index));
        }
        if h1(&self.params, &bundle.timestamp)? != bundle.offset {
            return Err(Error::InconsistentBundle("w != H1(t)"));
        }
        if self.config.recompute_offset && g.exp_g(&bundle.offset) != bundle.offset_commitment {
            return Err(Error::InconsistentBundle("W != g^w"));
        }

        let joint = bundle.joint_commitment(g);
        let c = h2(&self.params, &agg.key, &joint, &self.message);
        let nonce = self.nonce.take().expect("nonce present while Committed");
        let a = &agg.coefficients[self.index];
        let cax = g.scalar_mul(&g.scalar_mul(&c, a), &self.keypair.secret);
        let s_i = g.scalar_add(&g.scalar_add(&bundle.offset, &nonce), &cax);

        self.joint_commitment = Some(joint);
        self.challenge = Some(c);
        self.phase = SignerPhase::Finalized;
        Ok(s_i)
    }

    /// Combines the relayed partial signatures into `(U, s)`.
    pub fn finalize(&self, partials: &[G::Scalar]) -> Result<Signature<G>> {
        self.expect_phase(SignerPhase::Finalized, "finalize")?;
        let s = assemble(&self.params.group, partials, self.roster_len)?;
        Ok(Signature {
            commitment: self.joint_commitment.expect("set in round two"),
            s,
        })
    }
}

/// `s = Σ s_i mod p`.
pub fn assemble<G: Group>(group: &G, partials: &[G::Scalar], n: usize) -> Result<G::Scalar> {
    if partials.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: partials.len(),
        });
    }
    Ok(group.scalar_sum(partials))
}

/// Accepts iff `g^s = U · X̃^c` with `c = H2(X̃, U, m)`. Two exponentiations.
pub fn verify<G: Group>(
    params: &Params<G>,
    agg_key: &G::Element,
    m: &[u8],
    sig: &Signature<G>,
) -> bool {
    let g = &params.group;
    let c = h2(params, agg_key, &sig.commitment, m);
    let lhs = g.exp_g(&sig.s);
    let rhs = g.element_mul(&sig.commitment, &g.exp(agg_key, &c));
    lhs == rhs
}

/// Accepts iff `g^{s_i} = g^w · R_i · X_i^{a_i·c}`.
pub fn verify_partial<G: Group>(
    params: &Params<G>,
    commitment: &G::Element,
    public: &G::Element,
    coefficient: &G::Scalar,
    offset: &G::Scalar,
    challenge: &G::Scalar,
    partial: &G::Scalar,
) -> bool {
    let g = &params.group;
    let lhs = g.exp_g(partial);
    let key_part = g.exp(public, &g.scalar_mul(coefficient, challenge));
    let rhs = g.element_mul(&g.element_mul(&g.exp_g(offset), commitment), &key_part);
    lhs == rhs
}

/// Runs a complete honest session in-process, standing in for the
/// coordinator. Returns the signature and the aggregated key.
pub fn sign_locally<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    keypairs: &[KeyPair<G>],
    message: &[u8],
    timestamp: &[u8],
    rng: &mut R,
) -> Result<(Signature<G>, AggregatedKey<G>)> {
    let roster = Roster::new(keypairs.iter().map(|k| k.public).collect())?;
    let agg = aggregate(params, &roster);
    let mut sessions = keypairs
        .iter()
        .enumerate()
        .map(|(i, kp)| SignerSession::new(params, *kp, &roster, i, message))
        .collect::<Result<Vec<_>>>()?;
    let commitments = sessions
        .iter_mut()
        .map(|s| s.sign_round1(rng))
        .collect::<Result<Vec<_>>>()?;
    let bundle = Round1Bundle::new(params, commitments, timestamp.to_vec())?;
    let partials = sessions
        .iter_mut()
        .map(|s| s.sign_round2(&bundle, &agg))
        .collect::<Result<Vec<_>>>()?;
    Ok((sessions[0].finalize(&partials)?, agg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{Ristretto, ToyGroup};
    use crate::instrument::count_exps;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn keys<G: Group>(params: &Params<G>, n: usize, rng: &mut ChaCha20Rng) -> Vec<KeyPair<G>> {
        (0..n).map(|_| KeyPair::generate(params, rng)).collect()
    }

    #[test]
    fn keygen_forced_secrets() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        assert_eq!(
            *KeyPair::from_secret(&params, g.scalar_zero()).public(),
            g.identity()
        );
        assert_eq!(
            *KeyPair::from_secret(&params, g.scalar_one()).public(),
            g.generator()
        );
    }

    #[test]
    fn keygen_matches_repeated_multiplication() {
        let params = Params::new(ToyGroup::tiny());
        let g = &params.group;
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..50 {
            let kp = KeyPair::generate(&params, &mut rng);
            let x = kp.secret().value();
            let naive = (0..x).fold(g.identity(), |acc, _| g.element_mul(&acc, &g.generator()));
            assert_eq!(*kp.public(), naive);
        }
    }

    #[test]
    fn key_record_round_trip() {
        let params = Params::new(Ristretto);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = KeyPair::generate(&params, &mut rng);
        let line = kp.to_record(&params.group);
        assert_eq!(KeyPair::from_record(&params, &line).unwrap(), kp);
        let other = KeyPair::generate(&params, &mut rng);
        let forged = format!(
            "{} {}",
            params.group.scalar_to_hex(kp.secret()),
            params.group.element_to_hex(other.public())
        );
        assert!(KeyPair::from_record(&params, &forged).is_err());
        assert!(KeyPair::from_record(&params, "abc").is_err());
    }

    #[test]
    fn aggregate_single_key() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let x = g.exp_g(&g.scalar_from_u64(99));
        let agg = aggregate(&params, &Roster::new(vec![x]).unwrap());
        let a = crate::oracles::h0(&params, &[x], &x).unwrap();
        assert_eq!(agg.key, g.exp(&x, &a));
        assert_eq!(agg.coefficients, vec![a]);
    }

    #[test]
    fn aggregate_matches_naive_product() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let ks = keys(&params, 3, &mut rng);
        let pks: Vec<_> = ks.iter().map(|k| *k.public()).collect();
        let roster = Roster::new(pks.clone()).unwrap();
        let (agg, exps) = count_exps(|| aggregate(&params, &roster));
        assert_eq!(exps, 3);
        // naive loop: per-key H0 and direct modular exponentiation in u128
        let q = g.modulus();
        let mut expected: u128 = 1;
        for x in &pks {
            let a = crate::oracles::h0(&params, &pks, x).unwrap().value();
            let mut term: u128 = 1;
            let mut base = x.value();
            let mut e = a;
            while e > 0 {
                if e & 1 == 1 {
                    term = term * base % q;
                }
                base = base * base % q;
                e >>= 1;
            }
            expected = expected * term % q;
        }
        assert_eq!(agg.key.value(), expected);
    }

    #[test]
    fn aggregate_duplicate_keys() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let x = g.exp_g(&g.scalar_from_u64(1234));
        let agg = aggregate(&params, &Roster::new(vec![x, x]).unwrap());
        assert_eq!(agg.coefficients[0], agg.coefficients[1]);
        let two_a = g.scalar_add(&agg.coefficients[0], &agg.coefficients[1]);
        assert_eq!(agg.key, g.exp(&x, &two_a));
    }

    #[test]
    fn empty_roster_rejected() {
        assert_eq!(Roster::<Ristretto>::new(vec![]), Err(Error::EmptyRoster));
    }

    #[test]
    fn round1_forced_nonces_and_single_use() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let kp = KeyPair::generate(&params, &mut rng);
        let roster = Roster::new(vec![*kp.public()]).unwrap();

        let mut s = SignerSession::new(&params, kp, &roster, 0, b"m").unwrap();
        assert_eq!(
            s.sign_round1_with_nonce(g.scalar_zero()).unwrap(),
            g.identity()
        );
        assert!(matches!(s.sign_round1(&mut rng), Err(Error::Phase { .. })));

        let mut s = SignerSession::new(&params, kp, &roster, 0, b"m").unwrap();
        assert_eq!(
            s.sign_round1_with_nonce(g.scalar_one()).unwrap(),
            g.generator()
        );

        let mut s = SignerSession::new(&params, kp, &roster, 0, b"m").unwrap();
        let (_, exps) = count_exps(|| s.sign_round1(&mut rng).unwrap());
        assert_eq!(exps, 1);
    }

    #[test]
    fn session_rejects_wrong_slot() {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let ks = keys(&params, 2, &mut rng);
        let roster = Roster::new(vec![*ks[0].public(), *ks[1].public()]).unwrap();
        assert_eq!(
            SignerSession::new(&params, ks[0], &roster, 1, b"m").unwrap_err(),
            Error::RosterMismatch(1)
        );
        assert!(matches!(
            SignerSession::new(&params, ks[0], &roster, 2, b"m"),
            Err(Error::SlotOutOfRange { .. })
        ));
    }

    #[test]
    fn all_zero_degenerate_session_verifies() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let kp = KeyPair::from_secret(&params, g.scalar_zero());
        let roster = Roster::new(vec![*kp.public()]).unwrap();
        let agg = aggregate(&params, &roster);
        let mut s = SignerSession::new(&params, kp, &roster, 0, b"m").unwrap();
        let r = s.sign_round1_with_nonce(g.scalar_zero()).unwrap();
        // hand-built bundle with w = 0: bypasses H1, so the signer must reject it
        let bundle = Round1Bundle {
            commitments: vec![r],
            timestamp: b"t".to_vec(),
            offset: g.scalar_zero(),
            offset_commitment: g.identity(),
        };
        assert!(matches!(
            s.sign_round2(&bundle, &agg),
            Err(Error::InconsistentBundle(_))
        ));
        // the all-zero signature still satisfies the equation, since c·0 = 0 and U = 1
        let sig = Signature {
            commitment: g.identity(),
            s: g.scalar_zero(),
        };
        assert_eq!(agg.key, g.identity());
        assert!(verify(&params, &agg.key, b"m", &sig));
    }

    #[test]
    fn two_signer_exchange_satisfies_verification_equation() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let ks = keys(&params, 2, &mut rng);
        let (sig, agg) =
            sign_locally(&params, &ks, b"pay bob", b"1700000000000", &mut rng).unwrap();
        // independent oracle: recompute c and both sides of the equation with raw u128 arithmetic
        let q = g.modulus();
        let c = h2(&params, &agg.key, &sig.commitment, b"pay bob");
        let pow = |mut b: u128, mut e: u64| {
            let mut acc = 1u128;
            while e > 0 {
                if e & 1 == 1 {
                    acc = acc * b % q;
                }
                b = b * b % q;
                e >>= 1;
            }
            acc
        };
        let lhs = pow(g.generator().value(), sig.s.value());
        let rhs = sig.commitment.value() * pow(agg.key.value(), c.value()) % q;
        assert_eq!(lhs, rhs);
        assert!(verify(&params, &agg.key, b"pay bob", &sig));
    }

    #[test]
    fn tampered_timestamp_rejected() {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let ks = keys(&params, 2, &mut rng);
        let roster = Roster::new(ks.iter().map(|k| *k.public()).collect()).unwrap();
        let agg = aggregate(&params, &roster);
        let mut sessions: Vec<_> = ks
            .iter()
            .enumerate()
            .map(|(i, k)| SignerSession::new(&params, *k, &roster, i, b"m").unwrap())
            .collect();
        let rs: Vec<_> = sessions
            .iter_mut()
            .map(|s| s.sign_round1(&mut rng).unwrap())
            .collect();
        let mut bundle = Round1Bundle::new(&params, rs.clone(), b"t-1".to_vec()).unwrap();
        bundle.timestamp = b"t-2".to_vec();
        assert_eq!(
            sessions[0].sign_round2(&bundle, &agg),
            Err(Error::InconsistentBundle("w != H1(t)"))
        );
        // own commitment swapped out
        let mut swapped = Round1Bundle::new(&params, vec![rs[1], rs[0]], b"t".to_vec()).unwrap();
        assert_eq!(
            sessions[0].sign_round2(&swapped, &agg),
            Err(Error::CommitmentMismatch(0))
        );
        // forged W is caught only in recompute mode
        swapped.commitments = rs.clone();
        swapped.offset_commitment = params.group.generator();
        let mut paranoid = SignerSession::new(&params, ks[1], &roster, 1, b"m")
            .unwrap()
            .with_config(SignerConfig {
                recompute_offset: true,
            });
        let r1 = paranoid.sign_round1(&mut rng).unwrap();
        swapped.commitments[1] = r1;
        assert_eq!(
            paranoid.sign_round2(&swapped, &agg),
            Err(Error::InconsistentBundle("W != g^w"))
        );
        // short bundle
        let short = Round1Bundle::new(&params, vec![rs[0]], b"t".to_vec()).unwrap();
        assert!(matches!(
            sessions[0].sign_round2(&short, &agg),
            Err(Error::LengthMismatch { .. })
        ));
        // a correct bundle still works after the rejected attempts
        let good = Round1Bundle::new(&params, rs, b"t".to_vec()).unwrap();
        assert!(sessions[0].sign_round2(&good, &agg).is_ok());
        assert!(matches!(
            sessions[0].sign_round2(&good, &agg),
            Err(Error::Phase { .. })
        ));
    }

    #[test]
    fn signer_budget_is_one_exponentiation() {
        let params = Params::new(Ristretto);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let ks = keys(&params, 4, &mut rng);
        let roster = Roster::new(ks.iter().map(|k| *k.public()).collect()).unwrap();
        let agg = aggregate(&params, &roster);
        let mut sessions: Vec<_> = ks
            .iter()
            .enumerate()
            .map(|(i, k)| SignerSession::new(&params, *k, &roster, i, b"m").unwrap())
            .collect();
        let mut first_round = 0;
        let mut rs = vec![];
        for s in sessions.iter_mut() {
            let (r, e) = count_exps(|| s.sign_round1(&mut rng).unwrap());
            first_round = e;
            rs.push(r);
        }
        let bundle = Round1Bundle::new(&params, rs, b"t".to_vec()).unwrap();
        let (_, second_round) = count_exps(|| sessions[2].sign_round2(&bundle, &agg).unwrap());
        assert_eq!(first_round + second_round, 1);
    }

    #[test]
    fn nonce_erased_after_round_two() {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let kp = KeyPair::generate(&params, &mut rng);
        let roster = Roster::new(vec![*kp.public()]).unwrap();
        let agg = aggregate(&params, &roster);
        let mut s = SignerSession::new(&params, kp, &roster, 0, b"m").unwrap();
        assert_eq!(s.nonce(), None);
        let r = s.sign_round1(&mut rng).unwrap();
        assert!(s.nonce().is_some());
        let bundle = Round1Bundle::new(&params, vec![r], b"t".to_vec()).unwrap();
        s.sign_round2(&bundle, &agg).unwrap();
        assert_eq!(s.nonce(), None);
        assert_eq!(s.phase(), SignerPhase::Finalized);
    }

    #[test]
    fn assemble_cases() {
        let g = ToyGroup::tiny();
        let z = g.scalar_zero();
        assert_eq!(assemble(&g, &[z, z, z], 3).unwrap(), z);
        assert_eq!(assemble(&g, &[g.scalar(42)], 1).unwrap(), g.scalar(42));
        assert!(matches!(
            assemble(&g, &[z], 2),
            Err(Error::LengthMismatch { .. })
        ));
        let vals = [90u64, 55, 77, 3, 100];
        let list: Vec<_> = vals.iter().map(|v| g.scalar(*v)).collect();
        assert_eq!(
            assemble(&g, &list, 5).unwrap().value(),
            vals.iter().sum::<u64>() % 101
        );
    }

    #[test]
    fn verify_rejects_mutations() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let ks = keys(&params, 3, &mut rng);
        let (sig, agg) = sign_locally(&params, &ks, b"abc", b"ts", &mut rng).unwrap();
        assert!(verify(&params, &agg.key, b"abc", &sig));
        assert!(!verify(&params, &agg.key, b"abd", &sig));
        let bumped = Signature {
            s: g.scalar_add(&sig.s, &g.scalar_one()),
            ..sig
        };
        assert!(!verify(&params, &agg.key, b"abc", &bumped));
        let (_, exps) = count_exps(|| verify(&params, &agg.key, b"abc", &sig));
        assert_eq!(exps, 2);
    }

    #[test]
    fn partial_verification() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let ks = keys(&params, 3, &mut rng);
        let roster = Roster::new(ks.iter().map(|k| *k.public()).collect()).unwrap();
        let agg = aggregate(&params, &roster);
        let mut sessions: Vec<_> = ks
            .iter()
            .enumerate()
            .map(|(i, k)| SignerSession::new(&params, *k, &roster, i, b"m").unwrap())
            .collect();
        let rs: Vec<_> = sessions
            .iter_mut()
            .map(|s| s.sign_round1(&mut rng).unwrap())
            .collect();
        let bundle = Round1Bundle::new(&params, rs.clone(), b"t".to_vec()).unwrap();
        for (i, s) in sessions.iter_mut().enumerate() {
            let si = s.sign_round2(&bundle, &agg).unwrap();
            let c = *s.challenge().unwrap();
            let w = bundle.offset;
            let a = agg.coefficients[i];
            let x = ks[i].public();
            assert!(verify_partial(&params, &rs[i], x, &a, &w, &c, &si));
            let bumped = g.scalar_add(&si, &g.scalar_one());
            assert!(!verify_partial(&params, &rs[i], x, &a, &w, &c, &bumped));
            let w1 = g.scalar_add(&w, &g.scalar_one());
            assert!(!verify_partial(&params, &rs[i], x, &a, &w1, &c, &si));
        }
    }

    #[test]
    fn linearity_identity() {
        let params = Params::new(Ristretto);
        let g = &params.group;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let n = 5;
        let ks = keys(&params, n, &mut rng);
        let roster = Roster::new(ks.iter().map(|k| *k.public()).collect()).unwrap();
        let agg = aggregate(&params, &roster);
        let mut sessions: Vec<_> = ks
            .iter()
            .enumerate()
            .map(|(i, k)| SignerSession::new(&params, *k, &roster, i, b"lin").unwrap())
            .collect();
        let rs: Vec<_> = sessions
            .iter_mut()
            .map(|s| s.sign_round1(&mut rng).unwrap())
            .collect();
        let nonces: Vec<_> = sessions.iter().map(|s| s.nonce().unwrap()).collect();
        let bundle = Round1Bundle::new(&params, rs, b"stamp".to_vec()).unwrap();
        let partials: Vec<_> = sessions
            .iter_mut()
            .map(|s| s.sign_round2(&bundle, &agg).unwrap())
            .collect();
        let sig = sessions[0].finalize(&partials).unwrap();
        let c = *sessions[0].challenge().unwrap();
        let nw = g.scalar_mul(&g.scalar_from_u64(n as u64), &bundle.offset);
        let sum_r = g.scalar_sum(&nonces);
        let sum_ax = ks
            .iter()
            .zip(&agg.coefficients)
            .fold(g.scalar_zero(), |acc, (k, a)| {
                g.scalar_add(&acc, &g.scalar_mul(a, k.secret()))
            });
        let expected = g.scalar_add(&g.scalar_add(&nw, &sum_r), &g.scalar_mul(&c, &sum_ax));
        assert_eq!(sig.s, expected);
    }

    #[test]
    fn signature_encoding_round_trip() {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let ks = keys(&params, 2, &mut rng);
        let (sig, _) = sign_locally(&params, &ks, b"x", b"t", &mut rng).unwrap();
        let hex = sig.to_hex(&params.group);
        assert_eq!(Signature::from_hex(&params.group, &hex).unwrap(), sig);
        assert!(Signature::from_hex(&params.group, &hex[2..]).is_err());
    }
}
