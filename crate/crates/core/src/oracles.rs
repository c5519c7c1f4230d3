//! Hash-to-scalar random oracles `H0`, `H1`, `H2`.
//!
//! Every oracle hashes `tag ‖ body` and expands it to 64 bytes as
//!
//! ```text
//! wide = SHA-256(tag ‖ body ‖ 0x00) ‖ SHA-256(tag ‖ body ‖ 0x01)
//! ```
//!
//! which is then read as a big-endian integer and reduced modulo `p`.
//! Reducing a 512-bit value keeps the bias below `2^-128` for any order of at
//! most 256 bits. Bodies are:
//!
//! | oracle | body                                                        |
//! |--------|-------------------------------------------------------------|
//! | `H0`   | `u32_be(n) ‖ enc(X_1) ‖ … ‖ enc(X_n) ‖ enc(X)`              |
//! | `H1`   | `t`                                                         |
//! | `H2`   | `enc(X̃) ‖ enc(U) ‖ m`                                       |
//!
//! Default tags are the ASCII strings `MEMS/H0`, `MEMS/H1`, `MEMS/H2`.
//!
//! In attack mode `H2` keeps only the low `b` bits of `wide` instead of
//! reducing modulo `p`; `H0` and `H1` are never affected.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::Group;

pub const TAG_H0: &[u8] = b"MEMS/H0";
pub const TAG_H1: &[u8] = b"MEMS/H1";
pub const TAG_H2: &[u8] = b"MEMS/H2";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashFunction {
    Sha256,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleConfig {
    hash: HashFunction,
    challenge_bits: Option<u32>,
    tags: [Vec<u8>; 3],
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            hash: HashFunction::Sha256,
            challenge_bits: None,
            tags: [TAG_H0.to_vec(), TAG_H1.to_vec(), TAG_H2.to_vec()],
        }
    }
}

impl OracleConfig {
    pub fn with_tags(tags: [Vec<u8>; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                if i != j && tags[j].starts_with(&tags[i]) {
                    return Err(Error::OracleConfig(
                        "domain tags must be distinct and prefix-free".into(),
                    ));
                }
            }
        }
        Ok(OracleConfig {
            tags,
            ..Default::default()
        })
    }

    /// Truncates `H2` outputs to `bits` bits.
    pub fn with_challenge_bits(mut self, bits: u32) -> Self {
        self.challenge_bits = Some(bits);
        self
    }

    pub fn hash_function(&self) -> HashFunction {
        self.hash
    }

    pub fn challenge_bits(&self) -> Option<u32> {
        self.challenge_bits
    }

    pub fn tags(&self) -> &[Vec<u8>; 3] {
        &self.tags
    }

    fn validate<G: Group>(&self, group: &G) -> Result<()> {
        if let Some(b) = self.challenge_bits {
            if b == 0 || b > 64 || b > group.order_bits() {
                return Err(Error::OracleConfig(format!(
                    "challenge width {b} must be in 1..=min(64, {})",
                    group.order_bits()
                )));
            }
        }
        Ok(())
    }
}

/// Public parameters shared by every party: the group and the oracles.
#[derive(Debug, Clone)]
pub struct Params<G: Group> {
    pub group: G,
    pub oracles: OracleConfig,
}

impl<G: Group> Params<G> {
    pub fn new(group: G) -> Self {
        Params {
            group,
            oracles: OracleConfig::default(),
        }
    }

    pub fn with_oracles(group: G, oracles: OracleConfig) -> Result<Self> {
        oracles.validate(&group)?;
        Ok(Params { group, oracles })
    }
}

fn expand(state: Sha256) -> [u8; 64] {
    let mut out = [0u8; 64];
    let mut first = state.clone();
    first.update([0u8]);
    out[..32].copy_from_slice(&first.finalize());
    let mut second = state;
    second.update([1u8]);
    out[32..].copy_from_slice(&second.finalize());
    out
}

/// Hashes `tag ‖ body` to a scalar with the same wide reduction as the
/// protocol oracles. Used for auxiliary hashes such as the MuSig2-style
/// nonce coefficients.
pub fn hash_to_scalar<G: Group>(group: &G, tag: &[u8], body: &[u8]) -> G::Scalar {
    let mut state = tagged(tag);
    state.update(body);
    group.scalar_from_wide(&expand(state))
}

fn tagged(tag: &[u8]) -> Sha256 {
    let mut h = Sha256::new();
    h.update(tag);
    h
}

fn h0_prefix<G: Group>(params: &Params<G>, pk_list: &[G::Element]) -> Sha256 {
    let g = &params.group;
    let mut state = tagged(&params.oracles.tags[0]);
    state.update((pk_list.len() as u32).to_be_bytes());
    for pk in pk_list {
        state.update(g.encode_element(pk));
    }
    state
}

/// Key-aggregation coefficient `a = H0(PK, X)`; `X` must occur in `PK`.
pub fn h0<G: Group>(
    params: &Params<G>,
    pk_list: &[G::Element],
    x: &G::Element,
) -> Result<G::Scalar> {
    if !pk_list.contains(x) {
        return Err(Error::NotInRoster);
    }
    let mut state = h0_prefix(params, pk_list);
    state.update(params.group.encode_element(x));
    Ok(params.group.scalar_from_wide(&expand(state)))
}

/// `H0(PK, X_i)` for every roster slot, sharing the hash of the list prefix.
pub fn h0_all<G: Group>(params: &Params<G>, pk_list: &[G::Element]) -> Vec<G::Scalar> {
    let prefix = h0_prefix(params, pk_list);
    pk_list
        .iter()
        .map(|x| {
            let mut state = prefix.clone();
            state.update(params.group.encode_element(x));
            params.group.scalar_from_wide(&expand(state))
        })
        .collect()
}

/// `w = H1(t)`.
pub fn h1<G: Group>(params: &Params<G>, t: &[u8]) -> Result<G::Scalar> {
    if t.is_empty() {
        return Err(Error::EmptyInput("H1"));
    }
    let mut state = tagged(&params.oracles.tags[1]);
    state.update(t);
    Ok(params.group.scalar_from_wide(&expand(state)))
}

fn h2_wide<G: Group>(params: &Params<G>, agg: &G::Element, u: &G::Element, m: &[u8]) -> [u8; 64] {
    let g = &params.group;
    let mut state = tagged(&params.oracles.tags[2]);
    state.update(g.encode_element(agg));
    state.update(g.encode_element(u));
    state.update(m);
    expand(state)
}

fn low_bits(wide: &[u8; 64], bits: u32) -> u64 {
    let tail = u64::from_be_bytes(wide[56..].try_into().expect("8 bytes"));
    if bits == 64 {
        tail
    } else {
        tail & ((1u64 << bits) - 1)
    }
}

/// Challenge `c = H2(X̃, U, m)`.
pub fn h2<G: Group>(params: &Params<G>, agg: &G::Element, u: &G::Element, m: &[u8]) -> G::Scalar {
    let wide = h2_wide(params, agg, u, m);
    match params.oracles.challenge_bits {
        None => params.group.scalar_from_wide(&wide),
        Some(bits) => params.group.scalar_from_u64(low_bits(&wide, bits)),
    }
}

/// The integer value of a truncated challenge. `None` outside attack mode.
pub fn h2_truncated<G: Group>(
    params: &Params<G>,
    agg: &G::Element,
    u: &G::Element,
    m: &[u8],
) -> Option<u64> {
    let bits = params.oracles.challenge_bits?;
    Some(low_bits(&h2_wide(params, agg, u, m), bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{Ristretto, ToyGroup};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    // Independent re-implementation: build the whole preimage as one buffer,
    // hash it twice with the counter byte, and reduce with explicit big-integer
    // long division over u128 limbs.
    fn oracle_reference(tag: &[u8], body: &[u8], p: u128) -> u128 {
        let mut buf = tag.to_vec();
        buf.extend_from_slice(body);
        let mut wide = Vec::new();
        for ctr in [0u8, 1u8] {
            let mut b = buf.clone();
            b.push(ctr);
            wide.extend_from_slice(&Sha256::digest(&b));
        }
        let mut r = 0u128;
        for byte in wide {
            for bit in (0..8).rev() {
                r = (r << 1) | u128::from((byte >> bit) & 1);
                if r >= p {
                    r -= p;
                }
            }
        }
        r
    }

    fn toy_setup() -> (Params<ToyGroup>, Vec<crate::group::ToyElement>) {
        let params = Params::new(ToyGroup::standard());
        let g = &params.group;
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let keys = (0..4)
            .map(|_| g.exp_g(&g.random_scalar(&mut rng)))
            .collect();
        (params, keys)
    }

    #[test]
    fn h0_matches_reference() {
        let (params, keys) = toy_setup();
        let g = &params.group;
        let p = u128::from(g.order());
        let mut body = (keys.len() as u32).to_be_bytes().to_vec();
        for k in &keys {
            body.extend(g.encode_element(k));
        }
        for (i, k) in keys.iter().enumerate() {
            let mut b = body.clone();
            b.extend(g.encode_element(k));
            let expected = oracle_reference(b"MEMS/H0", &b, p);
            let got = h0(&params, &keys, k).unwrap();
            assert_eq!(u128::from(got.value()), expected);
            assert_eq!(h0_all(&params, &keys)[i], got);
        }
    }

    #[test]
    fn h0_rejects_non_member() {
        let (params, keys) = toy_setup();
        let outsider = params.group.generator();
        assert_eq!(h0(&params, &keys, &outsider), Err(Error::NotInRoster));
    }

    #[test]
    fn h0_depends_on_order() {
        let (params, keys) = toy_setup();
        let mut permuted = keys.clone();
        permuted.swap(0, 1);
        assert_eq!(
            h0(&params, &keys, &keys[2]).unwrap(),
            h0(&params, &keys, &keys[2]).unwrap()
        );
        assert_ne!(
            h0(&params, &keys, &keys[2]).unwrap(),
            h0(&params, &permuted, &keys[2]).unwrap()
        );
    }

    #[test]
    fn h1_matches_reference_and_rejects_empty() {
        let params = Params::new(ToyGroup::standard());
        let p = u128::from(params.group.order());
        let t = [7u8; 24];
        assert_eq!(
            u128::from(h1(&params, &t).unwrap().value()),
            oracle_reference(b"MEMS/H1", &t, p)
        );
        assert_eq!(h1(&params, &[]), Err(Error::EmptyInput("H1")));
        let mut t2 = t;
        t2[23] ^= 1;
        assert_ne!(h1(&params, &t).unwrap(), h1(&params, &t2).unwrap());
        assert_eq!(h1(&params, &t).unwrap(), h1(&params, &t).unwrap());
    }

    #[test]
    fn h2_full_width_matches_reference_on_ristretto() {
        let params = Params::new(Ristretto);
        let g = &params.group;
        let x = g.exp_g(&g.scalar_from_u64(3));
        let u = g.exp_g(&g.scalar_from_u64(5));
        let mut body = g.encode_element(&x);
        body.extend(g.encode_element(&u));
        body.extend_from_slice(b"msg");
        let c = h2(&params, &x, &u, b"msg");
        // reduce via the curve library's own wide reduction as a second route
        let mut buf = b"MEMS/H2".to_vec();
        buf.extend_from_slice(&body);
        let mut wide = Vec::new();
        for ctr in [0u8, 1] {
            let mut b = buf.clone();
            b.push(ctr);
            wide.extend_from_slice(&Sha256::digest(&b));
        }
        wide.reverse();
        let expected =
            curve25519_dalek::Scalar::from_bytes_mod_order_wide(&wide.try_into().unwrap());
        assert_eq!(c, expected);
        assert_eq!(c, h2(&params, &x, &u, b"msg"));
    }

    #[test]
    fn h2_full_width_matches_reference_on_toy() {
        let (params, keys) = toy_setup();
        let g = &params.group;
        let mut body = g.encode_element(&keys[0]);
        body.extend(g.encode_element(&keys[1]));
        body.extend_from_slice(b"hello");
        let c = h2(&params, &keys[0], &keys[1], b"hello");
        assert_eq!(
            u128::from(c.value()),
            oracle_reference(b"MEMS/H2", &body, u128::from(g.order()))
        );
    }

    #[test]
    fn attack_mode_range() {
        let group = ToyGroup::standard();
        let params =
            Params::with_oracles(group, OracleConfig::default().with_challenge_bits(16)).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for i in 0..1000u32 {
            let x = group.exp_g(&group.random_scalar(&mut rng));
            let c = h2(&params, &x, &x, &i.to_be_bytes());
            assert!(c.value() < 65_536);
            assert_eq!(
                Some(c.value()),
                h2_truncated(&params, &x, &x, &i.to_be_bytes())
            );
        }
        // H0/H1 unaffected by attack mode
        let full = Params::new(group);
        let keys = [group.generator()];
        assert_eq!(h0(&params, &keys, &keys[0]), h0(&full, &keys, &keys[0]));
        assert_eq!(h1(&params, b"t"), h1(&full, b"t"));
        assert_eq!(h2_truncated(&full, &keys[0], &keys[0], b"m"), None);
    }

    #[test]
    fn attack_width_validated() {
        let tiny = ToyGroup::tiny();
        assert!(
            Params::with_oracles(tiny, OracleConfig::default().with_challenge_bits(8)).is_err()
        );
        assert!(Params::with_oracles(tiny, OracleConfig::default().with_challenge_bits(6)).is_ok());
        assert!(
            Params::with_oracles(Ristretto, OracleConfig::default().with_challenge_bits(0))
                .is_err()
        );
    }

    #[test]
    fn domain_separation() {
        let params = Params::new(Ristretto);
        let g = &params.group;
        let x = g.generator();
        // Same raw payload fed to each oracle's body position
        let mut payload = 1u32.to_be_bytes().to_vec();
        payload.extend(g.encode_element(&x));
        payload.extend(g.encode_element(&x));
        let a0 = h0(&params, &[x], &x).unwrap();
        let a1 = h1(&params, &payload).unwrap();
        let plain =
            OracleConfig::with_tags([b"T0".to_vec(), b"T1".to_vec(), b"T2".to_vec()]).unwrap();
        assert_ne!(a0, a1);
        // h2 with the same body: enc(x) ‖ enc(x) ‖ m where m is empty, vs h1 of the same bytes
        let body = [g.encode_element(&x), g.encode_element(&x)].concat();
        assert_ne!(h2(&params, &x, &x, b""), h1(&params, &body).unwrap());
        assert!(OracleConfig::with_tags([b"A".to_vec(), b"AB".to_vec(), b"C".to_vec()]).is_err());
        assert!(OracleConfig::with_tags([b"A".to_vec(), b"A".to_vec(), b"C".to_vec()]).is_err());
        let custom = Params::with_oracles(Ristretto, plain).unwrap();
        assert_ne!(h1(&custom, b"x").unwrap(), h1(&params, b"x").unwrap());
    }

    #[test]
    fn reduction_is_uniform_over_tiny_order() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let params = Params::new(ToyGroup::tiny());
        let mut counts = [0usize; 101];
        let draws = 50_000u32;
        for i in 0..draws {
            counts[h1(&params, &i.to_be_bytes()).unwrap().value() as usize] += 1;
        }
        let expected = f64::from(draws) / 101.0;
        let stat: f64 = counts
            .iter()
            .map(|c| (*c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(stat < ChiSquared::new(100.0).unwrap().inverse_cdf(0.999));
    }
}
