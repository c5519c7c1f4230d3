use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::{Identity, VartimeMultiscalarMul};
use rand::RngCore;

use super::{Backend, Group, GroupDescription};
use crate::error::{Error, Result};

/// The ristretto255 group: prime order
/// `l = 2^252 + 27742317777372353535851937790883648493`, 32-byte encodings.
///
/// Ristretto quotients out the curve cofactor, so every decodable point is in
/// the prime-order group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ristretto;

const LEN: usize = 32;

fn reversed(bytes: [u8; 32]) -> [u8; 32] {
    let mut out = bytes;
    out.reverse();
    out
}

impl Group for Ristretto {
    type Scalar = Scalar;
    type Element = RistrettoPoint;

    fn description(&self) -> GroupDescription {
        // l = (l - 1) + 1, big-endian
        let mut order = reversed((-Scalar::ONE).to_bytes()).to_vec();
        for b in order.iter_mut().rev() {
            let (v, carry) = b.overflowing_add(1);
            *b = v;
            if !carry {
                break;
            }
        }
        GroupDescription {
            backend: Backend::Production,
            order,
            generator: self.encode_element(&self.generator()),
            element_len: LEN,
            scalar_len: LEN,
            modulus: None,
        }
    }

    fn element_len(&self) -> usize {
        LEN
    }

    fn scalar_len(&self) -> usize {
        LEN
    }

    fn order_bits(&self) -> u32 {
        253
    }

    fn scalar_from_u64(&self, v: u64) -> Scalar {
        Scalar::from(v)
    }

    fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a + b
    }

    fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a * b
    }

    fn scalar_neg(&self, a: &Scalar) -> Scalar {
        -a
    }

    fn scalar_inv(&self, a: &Scalar) -> Result<Scalar> {
        if *a == Scalar::ZERO {
            return Err(Error::ZeroInversion);
        }
        Ok(a.invert())
    }

    fn scalar_from_wide(&self, bytes: &[u8; 64]) -> Scalar {
        let mut le = *bytes;
        le.reverse();
        Scalar::from_bytes_mod_order_wide(&le)
    }

    fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Scalar {
        loop {
            let mut buf = [0u8; 32];
            rng.fill_bytes(&mut buf);
            // l has 253 bits; draw 253-bit candidates and reject those >= l
            buf[31] &= 0x1f;
            if let Some(s) = Option::<Scalar>::from(Scalar::from_canonical_bytes(buf)) {
                return s;
            }
        }
    }

    fn identity(&self) -> RistrettoPoint {
        RistrettoPoint::identity()
    }

    fn generator(&self) -> RistrettoPoint {
        RISTRETTO_BASEPOINT_POINT
    }

    fn element_mul(&self, a: &RistrettoPoint, b: &RistrettoPoint) -> RistrettoPoint {
        a + b
    }

    fn element_inv(&self, a: &RistrettoPoint) -> RistrettoPoint {
        -a
    }

    fn exp_uncounted(&self, base: &RistrettoPoint, e: &Scalar) -> RistrettoPoint {
        base * e
    }

    fn multi_exp_uncounted(&self, bases: &[RistrettoPoint], exps: &[Scalar]) -> RistrettoPoint {
        RistrettoPoint::vartime_multiscalar_mul(exps, bases)
    }

    fn encode_scalar(&self, s: &Scalar) -> Vec<u8> {
        reversed(s.to_bytes()).to_vec()
    }

    fn decode_scalar(&self, bytes: &[u8]) -> Result<Scalar> {
        let be: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::InvalidEncoding(format!("scalar must be {LEN} bytes")))?;
        Option::from(Scalar::from_canonical_bytes(reversed(be)))
            .ok_or_else(|| Error::InvalidEncoding("scalar not reduced mod l".into()))
    }

    fn encode_element(&self, e: &RistrettoPoint) -> Vec<u8> {
        e.compress().to_bytes().to_vec()
    }

    fn decode_element(&self, bytes: &[u8]) -> Result<RistrettoPoint> {
        let compressed = CompressedRistretto::from_slice(bytes)
            .map_err(|_| Error::InvalidEncoding(format!("element must be {LEN} bytes")))?;
        compressed
            .decompress()
            .ok_or_else(|| Error::InvalidEncoding("not a canonical ristretto point".into()))
    }
}
