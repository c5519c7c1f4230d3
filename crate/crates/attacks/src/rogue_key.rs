//! Rogue-key attack on naive key aggregation.
//!
//! The adversary publishes `X_n = (X_1⋯X_{n-1})^{-1}·g^{x_n}`, so the plain
//! product of all keys is `g^{x_n}` and it can sign alone. With MEMS
//! coefficients the aggregate no longer collapses to its key.

use mems_core::group::Group;
use mems_core::mems::{aggregate, Roster, Signature};
use mems_core::oracles::Params;
use mems_core::schnorr;
use rand::RngCore;

use crate::AttackError;

#[derive(Debug, Clone)]
pub struct RogueKeyDemo<G: Group> {
    pub rogue_secret: G::Scalar,
    /// `X_n`, the key the adversary publishes.
    pub rogue_public: G::Element,
    /// `∏ X_i` over all n keys, equal to `g^{x_n}`.
    pub plain_key: G::Element,
    pub message: Vec<u8>,
    /// Signature produced with `x_n` alone.
    pub forgery: Signature<G>,
    pub plain_forgery_verifies: bool,
    pub mems_key: G::Element,
    /// `X̃_MEMS == g^{x_n}`; false means the attack does not carry over.
    pub mems_key_collapses: bool,
    /// The same forgery checked against the MEMS aggregate.
    pub mems_forgery_verifies: bool,
}

pub fn rogue_key_attack<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    honest: &[G::Element],
    message: &[u8],
    rng: &mut R,
) -> Result<RogueKeyDemo<G>, AttackError> {
    if honest.is_empty() {
        return Err(AttackError::Precondition(
            "need at least one honest key".into(),
        ));
    }
    let g = &params.group;
    let x_n = g.random_scalar(rng);
    let target = g.exp_g(&x_n);
    let rogue_public = g.element_mul(&g.element_inv(&g.product(honest)), &target);
    let mut keys = honest.to_vec();
    keys.push(rogue_public);
    let plain_key = g.product(&keys);
    let forgery = schnorr::sign_with_secret(params, &x_n, &plain_key, message, rng);
    let plain_forgery_verifies = schnorr::verify(params, &plain_key, message, &forgery);
    let roster = Roster::new(keys)?;
    let mems_key = aggregate(params, &roster).key;
    Ok(RogueKeyDemo {
        rogue_secret: x_n,
        rogue_public,
        plain_key,
        message: message.to_vec(),
        forgery,
        plain_forgery_verifies,
        mems_key,
        mems_key_collapses: mems_key == target,
        mems_forgery_verifies: mems_core::mems::verify(params, &mems_key, message, &forgery),
    })
}
