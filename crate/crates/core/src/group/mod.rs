//! Prime-order cyclic groups.
//!
//! All schemes in this crate are written against the [`Group`] trait. Two
//! backends implement it:
//!
//! - [`Ristretto`]: the ristretto255 prime-order group (~2^252 order), used for
//!   real signing and benchmarks.
//! - [`ToyGroup`]: the order-`p` subgroup of `Z_q^*` for a configurable
//!   `p` of 8 to 64 bits. Small enough to brute-force and to run
//!   generalized-birthday attacks on a desk.
//!
//! No constant-time guarantees are made by either backend.

mod ristretto;
mod toy;

use std::fmt;

use rand::RngCore;

use crate::error::Result;
use crate::instrument;

pub use ristretto::Ristretto;
pub use toy::{toy_group_setup, ToyElement, ToyGroup, ToyScalar};

/// Which backend a [`GroupDescription`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Production,
    Toy,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Production => "production",
            Backend::Toy => "toy",
        })
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "production" => Ok(Backend::Production),
            "toy" => Ok(Backend::Toy),
            other => Err(format!(
                "unknown group backend {other:?} (expected production or toy)"
            )),
        }
    }
}

/// Public description of a group: backend, order, generator and encoding sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupDescription {
    pub backend: Backend,
    /// Big-endian encoding of the prime order `p`.
    pub order: Vec<u8>,
    /// Canonical encoding of the generator.
    pub generator: Vec<u8>,
    pub element_len: usize,
    pub scalar_len: usize,
    /// The modulus `q` of the ambient group `Z_q^*` (toy backend only).
    pub modulus: Option<u128>,
}

/// A cyclic group of prime order `p` with generator `g`.
///
/// Scalars are integers in `[0, p)`; elements are always members of the
/// order-`p` subgroup. Both encode to fixed-length byte strings (scalars
/// big-endian). Group operations take `&self` so that backends with runtime
/// parameters need not store them in every value.
pub trait Group: Clone + Send + Sync + fmt::Debug + 'static {
    type Scalar: Copy + Eq + fmt::Debug + Send + Sync + 'static;
    type Element: Copy + Eq + fmt::Debug + Send + Sync + 'static;

    fn description(&self) -> GroupDescription;
    fn element_len(&self) -> usize;
    fn scalar_len(&self) -> usize;
    /// Bit length of the order `p`.
    fn order_bits(&self) -> u32;

    fn scalar_from_u64(&self, v: u64) -> Self::Scalar;
    fn scalar_add(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_mul(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_neg(&self, a: &Self::Scalar) -> Self::Scalar;
    fn scalar_inv(&self, a: &Self::Scalar) -> Result<Self::Scalar>;
    /// Reduces a big-endian byte string of 64 bytes modulo `p`.
    fn scalar_from_wide(&self, bytes: &[u8; 64]) -> Self::Scalar;
    /// Uniform scalar by rejection sampling over full-width draws.
    fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Self::Scalar;

    fn identity(&self) -> Self::Element;
    fn generator(&self) -> Self::Element;
    fn element_mul(&self, a: &Self::Element, b: &Self::Element) -> Self::Element;
    fn element_inv(&self, a: &Self::Element) -> Self::Element;
    /// Exponentiation without touching the instrumentation counter. Used for
    /// validation work (subgroup checks) that is not part of any scheme.
    fn exp_uncounted(&self, base: &Self::Element, e: &Self::Scalar) -> Self::Element;

    fn encode_scalar(&self, s: &Self::Scalar) -> Vec<u8>;
    fn decode_scalar(&self, bytes: &[u8]) -> Result<Self::Scalar>;
    fn encode_element(&self, e: &Self::Element) -> Vec<u8>;
    /// Decodes an element, rejecting anything outside the order-`p` subgroup.
    fn decode_element(&self, bytes: &[u8]) -> Result<Self::Element>;

    fn scalar_zero(&self) -> Self::Scalar {
        self.scalar_from_u64(0)
    }

    fn scalar_one(&self) -> Self::Scalar {
        self.scalar_from_u64(1)
    }

    fn scalar_sub(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar {
        self.scalar_add(a, &self.scalar_neg(b))
    }

    /// `base^e`, counted by [`instrument`].
    fn exp(&self, base: &Self::Element, e: &Self::Scalar) -> Self::Element {
        instrument::record_exp();
        self.exp_uncounted(base, e)
    }

    /// `∏ bases[i]^{exps[i]}` over public inputs, counted as one
    /// exponentiation per term.
    fn multi_exp(&self, bases: &[Self::Element], exps: &[Self::Scalar]) -> Self::Element {
        assert_eq!(
            bases.len(),
            exps.len(),
            "multi_exp needs one exponent per base"
        );
        bases.iter().for_each(|_| instrument::record_exp());
        self.multi_exp_uncounted(bases, exps)
    }

    fn multi_exp_uncounted(&self, bases: &[Self::Element], exps: &[Self::Scalar]) -> Self::Element {
        bases.iter().zip(exps).fold(self.identity(), |acc, (b, e)| {
            self.element_mul(&acc, &self.exp_uncounted(b, e))
        })
    }

    /// `g^e`, counted.
    fn exp_g(&self, e: &Self::Scalar) -> Self::Element {
        self.exp(&self.generator(), e)
    }

    /// `base^n` for a small public integer `n`, by square-and-multiply over
    /// [`Group::element_mul`]. This is at most `2·log2(n)` group
    /// multiplications and is not counted as an exponentiation.
    fn pow_small(&self, base: &Self::Element, mut n: u64) -> Self::Element {
        let mut acc = self.identity();
        let mut sq = *base;
        while n > 0 {
            if n & 1 == 1 {
                acc = self.element_mul(&acc, &sq);
            }
            n >>= 1;
            if n > 0 {
                sq = self.element_mul(&sq, &sq);
            }
        }
        acc
    }

    /// Product of all elements; the identity for an empty iterator.
    fn product<'a, I>(&self, elems: I) -> Self::Element
    where
        I: IntoIterator<Item = &'a Self::Element>,
    {
        elems
            .into_iter()
            .fold(self.identity(), |acc, e| self.element_mul(&acc, e))
    }

    fn scalar_sum<'a, I>(&self, scalars: I) -> Self::Scalar
    where
        I: IntoIterator<Item = &'a Self::Scalar>,
    {
        scalars
            .into_iter()
            .fold(self.scalar_zero(), |acc, s| self.scalar_add(&acc, s))
    }

    fn scalar_to_hex(&self, s: &Self::Scalar) -> String {
        hex::encode(self.encode_scalar(s))
    }

    fn element_to_hex(&self, e: &Self::Element) -> String {
        hex::encode(self.encode_element(e))
    }

    fn scalar_from_hex(&self, s: &str) -> Result<Self::Scalar> {
        let bytes = hex::decode(s.trim())
            .map_err(|e| crate::Error::InvalidEncoding(format!("scalar hex: {e}")))?;
        self.decode_scalar(&bytes)
    }

    fn element_from_hex(&self, s: &str) -> Result<Self::Element> {
        let bytes = hex::decode(s.trim())
            .map_err(|e| crate::Error::InvalidEncoding(format!("element hex: {e}")))?;
        self.decode_element(&bytes)
    }
}
