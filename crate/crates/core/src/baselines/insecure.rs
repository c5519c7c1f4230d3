//! Two-round signing with a single commitment per signer and no coordinator.
//!
//! `c = H2(X̃, ∏R_i, m)` and `s_i = r_i + c·a_i·x_i`. The challenge depends on
//! the commitments only through their product, and a signer may pick its
//! commitment after seeing everyone else's. Together these make the scheme
//! forgeable with concurrent sessions and a generalized-birthday search.
//! It exists only as an attack target.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::group::Group;
use crate::mems::{assemble, AggregatedKey, KeyPair, Roster, Signature, SignerPhase};
use crate::oracles::{h2, Params};

#[derive(Debug)]
pub struct InsecureSession<G: Group> {
    params: Params<G>,
    keypair: KeyPair<G>,
    roster_len: usize,
    index: usize,
    message: Vec<u8>,
    phase: SignerPhase,
    nonce: Option<G::Scalar>,
    commitment: Option<G::Element>,
    joint_commitment: Option<G::Element>,
    challenge: Option<G::Scalar>,
}

impl<G: Group> InsecureSession<G> {
    pub fn new(
        params: &Params<G>,
        keypair: KeyPair<G>,
        roster: &Roster<G>,
        index: usize,
        message: &[u8],
    ) -> Result<Self> {
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
        Ok(InsecureSession {
            params: params.clone(),
            keypair,
            roster_len: roster.len(),
            index,
            message: message.to_vec(),
            phase: SignerPhase::Init,
            nonce: None,
            commitment: None,
            joint_commitment: None,
            challenge: None,
        })
    }

    pub fn message(&self) -> &[u8] {
        &self.message
    }

    pub fn challenge(&self) -> Option<&G::Scalar> {
        self.challenge.as_ref()
    }

    pub fn sign_round1<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<G::Element> {
        if self.phase != SignerPhase::Init {
            return Err(Error::Phase {
                op: "insecure_sign_round1",
                phase: "not Init",
            });
        }
        let g = &self.params.group;
        let r = g.random_scalar(rng);
        let big_r = g.exp_g(&r);
        self.nonce = Some(r);
        self.commitment = Some(big_r);
        self.phase = SignerPhase::Committed;
        Ok(big_r)
    }

    /// Round two over all commitments in roster order.
    pub fn sign_round2(
        &mut self,
        commitments: &[G::Element],
        agg: &AggregatedKey<G>,
    ) -> Result<G::Scalar> {
        if self.phase != SignerPhase::Committed {
            return Err(Error::Phase {
                op: "insecure_sign_round2",
                phase: "not Committed",
            });
        }
        if commitments.len() != self.roster_len {
            return Err(Error::LengthMismatch {
                expected: self.roster_len,
                actual: commitments.len(),
            });
        }
        if Some(&commitments[self.index]) != self.commitment.as_ref() {
            return Err(Error::CommitmentMismatch(self.index));
        }
        let g = &self.params.group;
        let joint = g.product(commitments);
        let c = h2(&self.params, &agg.key, &joint, &self.message);
        let r = self.nonce.take().expect("nonce present while Committed");
        let cax = g.scalar_mul(
            &g.scalar_mul(&c, &agg.coefficients[self.index]),
            self.keypair.secret(),
        );
        self.joint_commitment = Some(joint);
        self.challenge = Some(c);
        self.phase = SignerPhase::Finalized;
        Ok(g.scalar_add(&r, &cax))
    }

    pub fn finalize(&self, partials: &[G::Scalar]) -> Result<Signature<G>> {
        if self.phase != SignerPhase::Finalized {
            return Err(Error::Phase {
                op: "insecure_finalize",
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

/// `g^s = R·X̃^c` with `R = ∏R_i` carried in the signature.
pub fn insecure_verify<G: Group>(
    params: &Params<G>,
    agg_key: &G::Element,
    m: &[u8],
    sig: &Signature<G>,
) -> bool {
    crate::mems::verify(params, agg_key, m, sig)
}

/// An honest signer that answers any number of interleaved signing sessions.
///
/// This is the oracle an attacker talks to: it opens a session on request,
/// returns its commitment, and later answers with a partial signature once it
/// is given the full commitment list.
#[derive(Debug)]
pub struct SigningOracle<G: Group> {
    params: Params<G>,
    keypair: KeyPair<G>,
    roster: Roster<G>,
    index: usize,
    agg: AggregatedKey<G>,
    state: Mutex<OracleState<G>>,
}

#[derive(Debug)]
struct OracleState<G: Group> {
    next_id: u64,
    open: HashMap<u64, InsecureSession<G>>,
    signed: Vec<Vec<u8>>,
}

impl<G: Group> SigningOracle<G> {
    pub fn new(
        params: &Params<G>,
        keypair: KeyPair<G>,
        roster: Roster<G>,
        index: usize,
    ) -> Result<Self> {
        InsecureSession::new(params, keypair, &roster, index, b"")?;
        let agg = crate::mems::aggregate(params, &roster);
        Ok(SigningOracle {
            params: params.clone(),
            keypair,
            roster,
            index,
            agg,
            state: Mutex::new(OracleState {
                next_id: 0,
                open: HashMap::new(),
                signed: Vec::new(),
            }),
        })
    }

    pub fn public(&self) -> &G::Element {
        self.keypair.public()
    }

    pub fn roster(&self) -> &Roster<G> {
        &self.roster
    }

    pub fn aggregated_key(&self) -> &AggregatedKey<G> {
        &self.agg
    }

    /// Opens a session on `message`; returns its id and the honest commitment.
    pub fn open<R: RngCore + ?Sized>(
        &self,
        message: &[u8],
        rng: &mut R,
    ) -> Result<(u64, G::Element)> {
        let mut session = InsecureSession::new(
            &self.params,
            self.keypair,
            &self.roster,
            self.index,
            message,
        )?;
        let r = session.sign_round1(rng)?;
        let mut st = self.state.lock().expect("oracle lock");
        let id = st.next_id;
        st.next_id += 1;
        st.open.insert(id, session);
        Ok((id, r))
    }

    /// Answers session `id` given all commitments in roster order.
    pub fn respond(&self, id: u64, commitments: &[G::Element]) -> Result<G::Scalar> {
        let mut session = {
            let mut st = self.state.lock().expect("oracle lock");
            st.open
                .remove(&id)
                .ok_or_else(|| Error::Invalid(format!("no open session {id}")))?
        };
        let s = session.sign_round2(commitments, &self.agg)?;
        self.state
            .lock()
            .expect("oracle lock")
            .signed
            .push(session.message().to_vec());
        Ok(s)
    }

    pub fn open_sessions(&self) -> usize {
        self.state.lock().expect("oracle lock").open.len()
    }

    /// Every message the oracle has produced a partial signature for.
    pub fn signed_messages(&self) -> Vec<Vec<u8>> {
        self.state.lock().expect("oracle lock").signed.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::ToyGroup;
    use crate::mems::aggregate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn honest_two_signer_run() {
        let params = Params::new(ToyGroup::standard());
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let ks: Vec<_> = (0..2)
            .map(|_| KeyPair::generate(&params, &mut rng))
            .collect();
        let roster = Roster::new(ks.iter().map(|k| *k.public()).collect()).unwrap();
        let agg = aggregate(&params, &roster);
        let mut sessions: Vec<_> = ks
            .iter()
            .enumerate()
            .map(|(i, k)| InsecureSession::new(&params, *k, &roster, i, b"m").unwrap())
            .collect();
        let rs: Vec<_> = sessions
            .iter_mut()
            .map(|s| s.sign_round1(&mut rng).unwrap())
            .collect();
        let partials: Vec<_> = sessions
            .iter_mut()
            .map(|s| s.sign_round2(&rs, &agg).unwrap())
            .collect();
        let sig = sessions[0].finalize(&partials).unwrap();
        assert!(insecure_verify(&params, &agg.key, b"m", &sig));
        assert!(!insecure_verify(&params, &agg.key, b"n", &sig));
    }

    #[test]
    fn challenge_depends_only_on_product() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let ks: Vec<_> = (0..2)
            .map(|_| KeyPair::generate(&params, &mut rng))
            .collect();
        let roster = Roster::new(ks.iter().map(|k| *k.public()).collect()).unwrap();
        let agg = aggregate(&params, &roster);
        let r_a = g.exp_g(&g.random_scalar(&mut rng));
        let r_b = g.exp_g(&g.random_scalar(&mut rng));
        // who contributed which factor does not matter, only the product does
        let c1 = h2(&params, &agg.key, &g.product(&[r_a, r_b]), b"m");
        let c2 = h2(&params, &agg.key, &g.product(&[r_b, r_a]), b"m");
        assert_eq!(c1, c2);
        let shifted = g.exp_g(&g.scalar_from_u64(5));
        let r_a2 = g.element_mul(&r_a, &shifted);
        let r_b2 = g.element_mul(&r_b, &g.element_inv(&shifted));
        assert_eq!(c1, h2(&params, &agg.key, &g.product(&[r_a2, r_b2]), b"m"));
    }

    #[test]
    fn oracle_handles_interleaved_sessions() {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let honest = KeyPair::generate(&params, &mut rng);
        let other = KeyPair::generate(&params, &mut rng);
        let roster = Roster::new(vec![*honest.public(), *other.public()]).unwrap();
        let oracle = SigningOracle::new(&params, honest, roster.clone(), 0).unwrap();
        let agg = oracle.aggregated_key().clone();
        let k = 8;
        let opened: Vec<_> = (0..k - 1)
            .map(|_| oracle.open(b"m", &mut rng).unwrap())
            .collect();
        assert_eq!(oracle.open_sessions(), k - 1);
        std::thread::scope(|scope| {
            for (id, r1) in &opened {
                let oracle = &oracle;
                let params = &params;
                let agg = &agg;
                let mut rng = ChaCha20Rng::seed_from_u64(*id + 100);
                let mut mine = InsecureSession::new(params, other, &roster, 1, b"m").unwrap();
                scope.spawn(move || {
                    let r2 = mine.sign_round1(&mut rng).unwrap();
                    let rs = [*r1, r2];
                    let s1 = oracle.respond(*id, &rs).unwrap();
                    let s2 = mine.sign_round2(&rs, agg).unwrap();
                    let sig = mine.finalize(&[s1, s2]).unwrap();
                    assert!(insecure_verify(params, &agg.key, b"m", &sig));
                });
            }
        });
        assert_eq!(oracle.open_sessions(), 0);
        assert_eq!(oracle.signed_messages().len(), k - 1);
        assert!(oracle.respond(0, &[g.generator(), g.generator()]).is_err());
    }
}
