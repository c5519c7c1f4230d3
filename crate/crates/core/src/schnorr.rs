//! Single-signer Schnorr signatures over the same group and challenge oracle.
//!
//! A signature is `(R, s)` with `c = H2(X, R, m)` and `s = r + c·x`, so it
//! verifies with exactly the multi-signature equation `g^s = R·X^c`.

use rand::RngCore;

use crate::group::Group;
use crate::mems::{KeyPair, Signature};
use crate::oracles::{h2, Params};

pub fn sign<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    keypair: &KeyPair<G>,
    m: &[u8],
    rng: &mut R,
) -> Signature<G> {
    let g = &params.group;
    let r = g.random_scalar(rng);
    sign_with_nonce(params, keypair.secret(), keypair.public(), m, &r)
}

pub(crate) fn sign_with_nonce<G: Group>(
    params: &Params<G>,
    secret: &G::Scalar,
    public: &G::Element,
    m: &[u8],
    nonce: &G::Scalar,
) -> Signature<G> {
    let g = &params.group;
    let commitment = g.exp_g(nonce);
    let c = h2(params, public, &commitment, m);
    let s = g.scalar_add(nonce, &g.scalar_mul(&c, secret));
    Signature { commitment, s }
}

/// Signs with a bare secret whose public key is `g^secret`. Used where the
/// signer holds a secret for a key it did not generate through [`KeyPair`].
pub fn sign_with_secret<G: Group, R: RngCore + ?Sized>(
    params: &Params<G>,
    secret: &G::Scalar,
    public: &G::Element,
    m: &[u8],
    rng: &mut R,
) -> Signature<G> {
    let r = params.group.random_scalar(rng);
    sign_with_nonce(params, secret, public, m, &r)
}

pub fn verify<G: Group>(
    params: &Params<G>,
    public: &G::Element,
    m: &[u8],
    sig: &Signature<G>,
) -> bool {
    crate::mems::verify(params, public, m, sig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Ristretto;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn sign_verify() {
        let params = Params::new(Ristretto);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let kp = KeyPair::generate(&params, &mut rng);
        let sig = sign(&params, &kp, b"hello", &mut rng);
        assert!(verify(&params, kp.public(), b"hello", &sig));
        assert!(!verify(&params, kp.public(), b"hellp", &sig));
        let other = KeyPair::generate(&params, &mut rng);
        assert!(!verify(&params, other.public(), b"hello", &sig));
    }
}
