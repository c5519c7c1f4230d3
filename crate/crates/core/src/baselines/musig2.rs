//! Two-round signing with commitment vectors, in the style of MuSig2.
//!
//! Each signer commits to `v` nonces. After the vectors are exchanged, every
//! signer forms the column products `R_j = ∏_i R_{ij}`, derives coefficients
//! `b_1 = 1` and `b_j = Hb(R_1 ‖ … ‖ R_v ‖ j)` for `j ≥ 2`, and uses
//! `R = ∏_j R_j^{b_j}` as the joint nonce. The partial signature is
//! `s_i = Σ_j b_j·r_{ij} + c·a_i·x_i` with `c = H2(X̃, R, m)`.
//!
//! This is benchmark-faithful rather than standards-faithful: `b_j` hashes
//! only the column products, and signing costs `v + (v - 1) = 2v - 1`
//! exponentiations per signer.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::group::Group;
use crate::mems::{assemble, AggregatedKey, KeyPair, Roster, Signature, SignerPhase};
use crate::oracles::{h2, hash_to_scalar, Params};

pub const TAG_NONCE_COEFF: &[u8] = b"MEMS/MuSig2-b";

/// Default commitment-vector length.
pub const DEFAULT_V: usize = 4;

/// `b_1 = 1`, `b_j = Hb(enc(R_1) ‖ … ‖ enc(R_v) ‖ u32_be(j))`.
pub fn nonce_coefficients<G: Group>(group: &G, columns: &[G::Element]) -> Vec<G::Scalar> {
    let mut body: Vec<u8> = columns
        .iter()
        .flat_map(|r| group.encode_element(r))
        .collect();
    let prefix_len = body.len();
    (1..=columns.len())
        .map(|j| {
            if j == 1 {
                return group.scalar_one();
            }
            body.truncate(prefix_len);
            body.extend((j as u32).to_be_bytes());
            hash_to_scalar(group, TAG_NONCE_COEFF, &body)
        })
        .collect()
}

#[derive(Debug)]
pub struct VectorSignerSession<G: Group> {
    params: Params<G>,
    keypair: KeyPair<G>,
    roster_len: usize,
    index: usize,
    message: Vec<u8>,
    v: usize,
    phase: SignerPhase,
    nonces: Vec<G::Scalar>,
    commitments: Vec<G::Element>,
    joint_commitment: Option<G::Element>,
}

impl<G: Group> VectorSignerSession<G> {
    pub fn new(
        params: &Params<G>,
        keypair: KeyPair<G>,
        roster: &Roster<G>,
        index: usize,
        message: &[u8],
        v: usize,
    ) -> Result<Self> {
        if v < 2 {
            return Err(Error::Invalid(format!(
                "commitment vector length must be >= 2, got {v}"
            )));
        }
        match roster.keys().get(index) {
            None => {
                return Err(Error::SlotOutOfRange {
                    index,
                    len: roster.len(),
                })
            }
            Some(k) if k != keypair.public() => return Err(Error::RosterMismatch(index)),
            Some(_) => {}
        }
        Ok(VectorSignerSession {
            params: params.clone(),
            keypair,
            roster_len: roster.len(),
            index,
            message: message.to_vec(),
            v,
            phase: SignerPhase::Init,
            nonces: Vec::new(),
            commitments: Vec::new(),
            joint_commitment: None,
        })
    }

    pub fn phase(&self) -> SignerPhase {
        self.phase
    }

    fn commit(&mut self, nonces: Vec<G::Scalar>) -> Result<Vec<G::Element>> {
        if self.phase != SignerPhase::Init {
            return Err(Error::Phase {
                op: "musig2_sign_round1",
                phase: "not Init",
            });
        }
        let g = &self.params.group;
        self.commitments = nonces.iter().map(|r| g.exp_g(r)).collect();
        self.nonces = nonces;
        self.phase = SignerPhase::Committed;
        Ok(self.commitments.clone())
    }

    /// Round one: `v` fresh nonces and their commitments (`v` exponentiations).
    pub fn sign_round1<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<G::Element>> {
        let g = &self.params.group;
        let nonces = (0..self.v).map(|_| g.random_scalar(rng)).collect();
        self.commit(nonces)
    }

    #[cfg(any(test, feature = "test-hooks"))]
    pub fn sign_round1_with_nonces(&mut self, nonces: Vec<G::Scalar>) -> Result<Vec<G::Element>> {
        assert_eq!(nonces.len(), self.v);
        self.commit(nonces)
    }

    /// Round two over every signer's commitment vector, in roster order
    /// (`v - 1` exponentiations).
    pub fn sign_round2(
        &mut self,
        vectors: &[Vec<G::Element>],
        agg: &AggregatedKey<G>,
    ) -> Result<G::Scalar> {
        if self.phase != SignerPhase::Committed {
            return Err(Error::Phase {
                op: "musig2_sign_round2",
                phase: "not Committed",
            });
        }
        if vectors.len() != self.roster_len {
            return Err(Error::LengthMismatch {
                expected: self.roster_len,
                actual: vectors.len(),
            });
        }
        if let Some(bad) = vectors.iter().find(|vec| vec.len() != self.v) {
            return Err(Error::LengthMismatch {
                expected: self.v,
                actual: bad.len(),
            });
        }
        if vectors[self.index] != self.commitments {
            return Err(Error::CommitmentMismatch(self.index));
        }
        let g = &self.params.group;
        let columns: Vec<G::Element> = (0..self.v)
            .map(|j| g.product(vectors.iter().map(|vec| &vec[j])))
            .collect();
        let coeffs = nonce_coefficients(g, &columns);
        // b_1 = 1, so the first column needs no exponentiation
        let joint = columns
            .iter()
            .zip(&coeffs)
            .skip(1)
            .fold(columns[0], |acc, (r, b)| g.element_mul(&acc, &g.exp(r, b)));
        let c = h2(&self.params, &agg.key, &joint, &self.message);
        let nonce_part = self
            .nonces
            .iter()
            .zip(&coeffs)
            .fold(g.scalar_zero(), |acc, (r, b)| {
                g.scalar_add(&acc, &g.scalar_mul(r, b))
            });
        let key_part = g.scalar_mul(
            &g.scalar_mul(&c, &agg.coefficients[self.index]),
            self.keypair.secret(),
        );
        self.nonces.clear();
        self.joint_commitment = Some(joint);
        self.phase = SignerPhase::Finalized;
        Ok(g.scalar_add(&nonce_part, &key_part))
    }

    pub fn finalize(&self, partials: &[G::Scalar]) -> Result<Signature<G>> {
        if self.phase != SignerPhase::Finalized {
            return Err(Error::Phase {
                op: "musig2_finalize",
                phase: "not Finalized",
            });
        }
        let s = assemble(&self.params.group, partials, self.roster_len)?;
        Ok(Signature {
            commitment: self.joint_commitment.expect("set in round two"),
            s,
        })
    }
}

/// Same equation as MEMS: `g^s = R·X̃^c`.
pub fn musig2_verify<G: Group>(
    params: &Params<G>,
    agg_key: &G::Element,
    m: &[u8],
    sig: &Signature<G>,
) -> bool {
    crate::mems::verify(params, agg_key, m, sig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{Ristretto, ToyGroup};
    use crate::instrument::count_exps;
    use crate::mems::aggregate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup<G: Group>(
        params: &Params<G>,
        n: usize,
        v: usize,
        rng: &mut ChaCha20Rng,
    ) -> (Vec<VectorSignerSession<G>>, AggregatedKey<G>) {
        let ks: Vec<_> = (0..n).map(|_| KeyPair::generate(params, rng)).collect();
        let roster = Roster::new(ks.iter().map(|k| *k.public()).collect()).unwrap();
        let agg = aggregate(params, &roster);
        let sessions = ks
            .iter()
            .enumerate()
            .map(|(i, k)| VectorSignerSession::new(params, *k, &roster, i, b"msg", v).unwrap())
            .collect();
        (sessions, agg)
    }

    #[test]
    fn honest_run_verifies() {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (mut sessions, agg) = setup(&params, 3, 4, &mut rng);
        let vectors: Vec<_> = sessions
            .iter_mut()
            .map(|s| s.sign_round1(&mut rng).unwrap())
            .collect();
        let partials: Vec<_> = sessions
            .iter_mut()
            .map(|s| s.sign_round2(&vectors, &agg).unwrap())
            .collect();
        let sig = sessions[1].finalize(&partials).unwrap();
        assert!(musig2_verify(&params, &agg.key, b"msg", &sig));
        assert!(!musig2_verify(&params, &agg.key, b"msh", &sig));
    }

    #[test]
    fn zero_nonces_give_identity_joint_commitment() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (mut sessions, agg) = setup(&params, 1, 2, &mut rng);
        let vectors = vec![sessions[0]
            .sign_round1_with_nonces(vec![g.scalar_zero(); 2])
            .unwrap()];
        let s = sessions[0].sign_round2(&vectors, &agg).unwrap();
        let sig = sessions[0].finalize(&[s]).unwrap();
        assert_eq!(sig.commitment, g.identity());
        assert!(musig2_verify(&params, &agg.key, b"msg", &sig));
    }

    #[test]
    fn exponentiation_budget_is_2v_minus_1() {
        let params = Params::new(Ristretto);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for v in [2, 4, 6] {
            let (mut sessions, agg) = setup(&params, 3, v, &mut rng);
            let mut vectors = vec![];
            let mut r1 = 0;
            for s in sessions.iter_mut() {
                let (vec, e) = count_exps(|| s.sign_round1(&mut rng).unwrap());
                r1 = e;
                vectors.push(vec);
            }
            let (_, r2) = count_exps(|| sessions[0].sign_round2(&vectors, &agg).unwrap());
            assert_eq!(r1 as usize, v);
            assert_eq!((r1 + r2) as usize, 2 * v - 1);
        }
    }

    #[test]
    fn state_machine() {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (mut sessions, agg) = setup(&params, 2, 4, &mut rng);
        assert!(sessions[0].sign_round2(&[], &agg).is_err());
        let vectors: Vec<_> = sessions
            .iter_mut()
            .map(|s| s.sign_round1(&mut rng).unwrap())
            .collect();
        assert!(sessions[0].sign_round1(&mut rng).is_err());
        assert!(sessions[0].finalize(&[]).is_err());
        let mut swapped = vectors.clone();
        swapped.swap(0, 1);
        assert_eq!(
            sessions[0].sign_round2(&swapped, &agg),
            Err(Error::CommitmentMismatch(0))
        );
        sessions[0].sign_round2(&vectors, &agg).unwrap();
        assert!(sessions[0].sign_round2(&vectors, &agg).is_err());
    }

    #[test]
    fn rejects_short_vectors() {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = KeyPair::generate(&params, &mut rng);
        let roster = Roster::new(vec![*kp.public()]).unwrap();
        assert!(VectorSignerSession::new(&params, kp, &roster, 0, b"m", 1).is_err());
    }
}
