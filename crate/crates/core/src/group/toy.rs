use rand::{Rng, RngCore};

use super::{Backend, Group, GroupDescription};
use crate::error::{Error, Result};

/// Order-`p` subgroup of `Z_q^*` with `q = k·p + 1` both prime.
///
/// `p` is at most 64 bits and `q` at most 80 bits, which keeps every
/// residue in a `u128` and lets Miller-Rabin use a deterministic base set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyGroup {
    q: u128,
    p: u64,
    g: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToyScalar(pub(crate) u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToyElement(pub(crate) u128);

impl ToyScalar {
    pub fn value(&self) -> u64 {
        self.0
    }
}

impl ToyElement {
    pub fn value(&self) -> u128 {
        self.0
    }
}

const MAX_MODULUS_BITS: u32 = 80;

fn add_mod(a: u128, b: u128, m: u128) -> u128 {
    // a, b < m < 2^80, so a + b cannot overflow
    let s = a + b;
    if s >= m {
        s - m
    } else {
        s
    }
}

pub(crate) fn mul_mod(a: u128, b: u128, m: u128) -> u128 {
    if m <= 1u128 << 64 {
        return (a * b) % m;
    }
    let (mut a, mut b) = (a % m, b % m);
    if m < 1u128 << 88 {
        // Horner over 40-bit limbs of b keeps every product under 2^128
        const LIMB: u32 = 40;
        let mut r = 0;
        for shift in [80, 40, 0] {
            let limb = (b >> shift) & ((1 << LIMB) - 1);
            r = add_mod((r << LIMB) % m, a * limb % m, m);
        }
        return r;
    }
    let mut r = 0;
    while b > 0 {
        if b & 1 == 1 {
            r = add_mod(r, a, m);
        }
        a = add_mod(a, a, m);
        b >>= 1;
    }
    r
}

pub(crate) fn pow_mod(base: u128, mut e: u128, m: u128) -> u128 {
    let mut acc = 1 % m;
    let mut b = base % m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        e >>= 1;
        if e > 0 {
            b = mul_mod(b, b, m);
        }
    }
    acc
}

/// Deterministic Miller-Rabin for `n < 3.3·10^24` (covers every modulus
/// this backend accepts).
pub(crate) fn is_prime(n: u128) -> bool {
    const BASES: [u128; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];
    if n < 2 {
        return false;
    }
    for p in BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn byte_len(v: u128) -> usize {
    let bits = 128 - v.leading_zeros() as usize;
    bits.div_ceil(8).max(1)
}

fn be_fixed(v: u128, len: usize) -> Vec<u8> {
    v.to_be_bytes()[16 - len..].to_vec()
}

fn parse_be(bytes: &[u8], len: usize, what: &str) -> Result<u128> {
    if bytes.len() != len {
        return Err(Error::InvalidEncoding(format!(
            "{what} must be {len} bytes, got {}",
            bytes.len()
        )));
    }
    Ok(bytes
        .iter()
        .fold(0u128, |acc, b| (acc << 8) | u128::from(*b)))
}

impl ToyGroup {
    /// Builds a group from explicit parameters, checking every invariant.
    pub fn new(q: u128, p: u64, g: u128) -> Result<Self> {
        if 128 - q.leading_zeros() > MAX_MODULUS_BITS {
            return Err(Error::Setup(format!(
                "modulus exceeds {MAX_MODULUS_BITS} bits"
            )));
        }
        if !is_prime(q) {
            return Err(Error::Setup(format!("q = {q} is not prime")));
        }
        if p < 3 || !is_prime(u128::from(p)) {
            return Err(Error::Setup(format!("p = {p} is not an odd prime")));
        }
        if (q - 1) % u128::from(p) != 0 {
            return Err(Error::Setup("p does not divide q - 1".into()));
        }
        if g <= 1 || g >= q || pow_mod(g, u128::from(p), q) != 1 {
            return Err(Error::Setup("generator does not have order p".into()));
        }
        Ok(ToyGroup { q, p, g })
    }

    /// Fixed 48-bit-order group shared by the CLI and the attack harnesses:
    /// `p = 140737488355333`, `q = 12p + 1`, `g = 4096`.
    pub fn standard() -> Self {
        ToyGroup::new(1_688_849_860_263_997, 140_737_488_355_333, 4096)
            .expect("standard toy parameters are valid")
    }

    /// `q = 607`, `p = 101`, `g = 64`: small enough for exhaustive checks.
    pub fn tiny() -> Self {
        ToyGroup::new(607, 101, 64).expect("tiny toy parameters are valid")
    }

    pub fn modulus(&self) -> u128 {
        self.q
    }

    pub fn order(&self) -> u64 {
        self.p
    }

    pub fn scalar(&self, v: u64) -> ToyScalar {
        ToyScalar(v % self.p)
    }

    /// Wraps a raw residue without a subgroup check. Only for tests that need
    /// to build out-of-subgroup values.
    pub fn raw_element(&self, v: u128) -> ToyElement {
        ToyElement(v % self.q)
    }
}

impl Group for ToyGroup {
    type Scalar = ToyScalar;
    type Element = ToyElement;

    fn description(&self) -> GroupDescription {
        GroupDescription {
            backend: Backend::Toy,
            order: u128::from(self.p).to_be_bytes()[16 - self.scalar_len()..].to_vec(),
            generator: self.encode_element(&self.generator()),
            element_len: self.element_len(),
            scalar_len: self.scalar_len(),
            modulus: Some(self.q),
        }
    }

    fn element_len(&self) -> usize {
        byte_len(self.q)
    }

    fn scalar_len(&self) -> usize {
        byte_len(u128::from(self.p))
    }

    fn order_bits(&self) -> u32 {
        64 - self.p.leading_zeros()
    }

    fn scalar_from_u64(&self, v: u64) -> ToyScalar {
        self.scalar(v)
    }

    fn scalar_add(&self, a: &ToyScalar, b: &ToyScalar) -> ToyScalar {
        ToyScalar(((u128::from(a.0) + u128::from(b.0)) % u128::from(self.p)) as u64)
    }

    fn scalar_mul(&self, a: &ToyScalar, b: &ToyScalar) -> ToyScalar {
        ToyScalar(((u128::from(a.0) * u128::from(b.0)) % u128::from(self.p)) as u64)
    }

    fn scalar_neg(&self, a: &ToyScalar) -> ToyScalar {
        if a.0 == 0 {
            *a
        } else {
            ToyScalar(self.p - a.0)
        }
    }

    fn scalar_inv(&self, a: &ToyScalar) -> Result<ToyScalar> {
        if a.0 == 0 {
            return Err(Error::ZeroInversion);
        }
        let p = u128::from(self.p);
        Ok(ToyScalar(pow_mod(u128::from(a.0), p - 2, p) as u64))
    }

    fn scalar_from_wide(&self, bytes: &[u8; 64]) -> ToyScalar {
        let p = u128::from(self.p);
        let r = bytes
            .iter()
            .fold(0u128, |acc, b| ((acc << 8) | u128::from(*b)) % p);
        ToyScalar(r as u64)
    }

    fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> ToyScalar {
        let bits = self.order_bits();
        let mask = if bits == 64 {
            u64::MAX
        } else {
            (1u64 << bits) - 1
        };
        loop {
            let v = rng.next_u64() & mask;
            if v < self.p {
                return ToyScalar(v);
            }
        }
    }

    fn identity(&self) -> ToyElement {
        ToyElement(1)
    }

    fn generator(&self) -> ToyElement {
        ToyElement(self.g)
    }

    fn element_mul(&self, a: &ToyElement, b: &ToyElement) -> ToyElement {
        ToyElement(mul_mod(a.0, b.0, self.q))
    }

    fn element_inv(&self, a: &ToyElement) -> ToyElement {
        // a^(p-1) = a^-1 inside the order-p subgroup
        ToyElement(pow_mod(a.0, u128::from(self.p) - 1, self.q))
    }

    fn exp_uncounted(&self, base: &ToyElement, e: &ToyScalar) -> ToyElement {
        ToyElement(pow_mod(base.0, u128::from(e.0), self.q))
    }

    fn encode_scalar(&self, s: &ToyScalar) -> Vec<u8> {
        be_fixed(u128::from(s.0), self.scalar_len())
    }

    fn decode_scalar(&self, bytes: &[u8]) -> Result<ToyScalar> {
        let v = parse_be(bytes, self.scalar_len(), "scalar")?;
        if v >= u128::from(self.p) {
            return Err(Error::InvalidEncoding("scalar not reduced mod p".into()));
        }
        Ok(ToyScalar(v as u64))
    }

    fn encode_element(&self, e: &ToyElement) -> Vec<u8> {
        be_fixed(e.0, self.element_len())
    }

    fn decode_element(&self, bytes: &[u8]) -> Result<ToyElement> {
        let v = parse_be(bytes, self.element_len(), "element")?;
        if v == 0 || v >= self.q {
            return Err(Error::InvalidEncoding("residue out of range".into()));
        }
        if pow_mod(v, u128::from(self.p), self.q) != 1 {
            return Err(Error::NotInSubgroup);
        }
        Ok(ToyElement(v))
    }
}

/// Searches for a toy group whose order has exactly `p_bits` bits.
///
/// Picks a random prime `p`, then the smallest even `k` with `q = k·p + 1`
/// prime, then a generator `x^((q-1)/p) ≠ 1` for random `x`.
pub fn toy_group_setup<R: RngCore + ?Sized>(p_bits: u32, rng: &mut R) -> Result<ToyGroup> {
    if !(8..=64).contains(&p_bits) {
        return Err(Error::Setup(format!(
            "p-bits must be in 8..=64, got {p_bits}"
        )));
    }
    const PRIME_ATTEMPTS: usize = 10_000;
    const MAX_COFACTOR: u128 = 1 << 16;
    for _ in 0..PRIME_ATTEMPTS {
        let top = 1u64 << (p_bits - 1);
        let mask = if p_bits == 64 {
            u64::MAX
        } else {
            (1u64 << p_bits) - 1
        };
        let p = (rng.next_u64() & mask) | top | 1;
        if !is_prime(u128::from(p)) {
            continue;
        }
        let Some(q) = (2..MAX_COFACTOR)
            .step_by(2)
            .map(|k| k * u128::from(p) + 1)
            .find(|q| is_prime(*q))
        else {
            continue;
        };
        let cofactor = (q - 1) / u128::from(p);
        for _ in 0..64 {
            let x = rng.gen_range(2..q - 1);
            let h = pow_mod(x, cofactor, q);
            if h != 1 {
                return ToyGroup::new(q, p, h);
            }
        }
    }
    Err(Error::Setup(format!(
        "no suitable (q, p) found for {p_bits}-bit p after {PRIME_ATTEMPTS} attempts"
    )))
}
