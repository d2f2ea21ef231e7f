use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::traits::{Identity, VartimeMultiscalarMul};
use rand::RngCore;
use sha2::Sha512;

use crate::group::{count_exps, Group, Scalar};

/// The Ristretto255 prime-order group with hash-derived generators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ristretto255;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RistrettoScalar(pub curve25519_dalek::Scalar);

impl Add for RistrettoScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        RistrettoScalar(self.0 + rhs.0)
    }
}

impl Sub for RistrettoScalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        RistrettoScalar(self.0 - rhs.0)
    }
}

impl Mul for RistrettoScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        RistrettoScalar(self.0 * rhs.0)
    }
}

impl Neg for RistrettoScalar {
    type Output = Self;
    fn neg(self) -> Self {
        RistrettoScalar(-self.0)
    }
}

impl Scalar for RistrettoScalar {
    const ENCODED_LEN: usize = 32;

    fn zero() -> Self {
        RistrettoScalar(curve25519_dalek::Scalar::ZERO)
    }
    fn one() -> Self {
        RistrettoScalar(curve25519_dalek::Scalar::ONE)
    }
    fn from_u64(v: u64) -> Self {
        RistrettoScalar(v.into())
    }
    fn from_u128(v: u128) -> Self {
        RistrettoScalar(v.into())
    }
    fn invert(&self) -> Option<Self> {
        (!self.is_zero()).then(|| RistrettoScalar(self.0.invert()))
    }
    fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        RistrettoScalar(curve25519_dalek::Scalar::from_bytes_mod_order_wide(&wide))
    }
    fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes().to_vec()
    }
    fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Option::from(curve25519_dalek::Scalar::from_canonical_bytes(arr)).map(RistrettoScalar)
    }
    fn to_u64(&self) -> Option<u64> {
        let b = self.0.to_bytes();
        b[8..]
            .iter()
            .all(|x| *x == 0)
            .then(|| u64::from_le_bytes(b[..8].try_into().unwrap()))
    }
    fn below_order(_v: u64) -> bool {
        true
    }
}

fn generators() -> &'static (RistrettoPoint, RistrettoPoint) {
    static GENS: OnceLock<(RistrettoPoint, RistrettoPoint)> = OnceLock::new();
    GENS.get_or_init(|| {
        (
            RistrettoPoint::hash_from_bytes::<Sha512>(b"privocracy/ristretto255/g"),
            RistrettoPoint::hash_from_bytes::<Sha512>(b"privocracy/ristretto255/h"),
        )
    })
}

impl Group for Ristretto255 {
    type Scalar = RistrettoScalar;
    type Element = RistrettoPoint;

    const NAME: &'static str = "ristretto255";
    const CHALLENGE_BITS: u32 = 128;
    const ELEMENT_LEN: usize = 32;

    fn identity() -> RistrettoPoint {
        RistrettoPoint::identity()
    }
    fn g() -> RistrettoPoint {
        generators().0
    }
    fn h() -> RistrettoPoint {
        generators().1
    }
    fn op(a: &RistrettoPoint, b: &RistrettoPoint) -> RistrettoPoint {
        a + b
    }
    fn inverse(a: &RistrettoPoint) -> RistrettoPoint {
        -a
    }
    fn exp(base: &RistrettoPoint, e: &RistrettoScalar) -> RistrettoPoint {
        count_exps(1);
        base * e.0
    }
    fn encode(a: &RistrettoPoint) -> Vec<u8> {
        a.compress().to_bytes().to_vec()
    }
    fn decode(bytes: &[u8]) -> Option<RistrettoPoint> {
        CompressedRistretto::from_slice(bytes).ok()?.decompress()
    }
    fn multi_exp(terms: &[(RistrettoPoint, RistrettoScalar)]) -> RistrettoPoint {
        count_exps(terms.len());
        RistrettoPoint::vartime_multiscalar_mul(
            terms.iter().map(|(_, s)| s.0),
            terms.iter().map(|(p, _)| *p),
        )
    }
}
