//! Prime-order subgroups of `Z_p^*` for a safe prime `p = 2q + 1`.
//!
//! These are far too small to be secure. They exist so that tests can
//! enumerate every exponent and check identities exactly.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::{Rng, RngCore};

use crate::group::{count_exps, Group, Scalar};

const fn byte_len(x: u64) -> usize {
    let bits = 64 - x.leading_zeros() as usize;
    if bits == 0 {
        1
    } else {
        (bits + 7) / 8
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        e >>= 1;
    }
    acc
}

fn to_le(v: u64, len: usize) -> Vec<u8> {
    v.to_le_bytes()[..len].to_vec()
}

fn from_le(bytes: &[u8], len: usize) -> Option<u64> {
    if bytes.len() != len {
        return None;
    }
    let mut buf = [0u8; 8];
    buf[..len].copy_from_slice(bytes);
    Some(u64::from_le_bytes(buf))
}

/// Integers modulo the prime `Q`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ModQ<const Q: u64>(u64);

impl<const Q: u64> ModQ<Q> {
    pub fn new(v: u64) -> Self {
        ModQ(v % Q)
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

impl<const Q: u64> fmt::Debug for ModQ<Q> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<const Q: u64> Add for ModQ<Q> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        ModQ(((self.0 as u128 + rhs.0 as u128) % Q as u128) as u64)
    }
}

impl<const Q: u64> Sub for ModQ<Q> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<const Q: u64> Neg for ModQ<Q> {
    type Output = Self;
    fn neg(self) -> Self {
        if self.0 == 0 {
            self
        } else {
            ModQ(Q - self.0)
        }
    }
}

impl<const Q: u64> Mul for ModQ<Q> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        ModQ(mul_mod(self.0, rhs.0, Q))
    }
}

impl<const Q: u64> Scalar for ModQ<Q> {
    const ENCODED_LEN: usize = byte_len(Q - 1);

    fn zero() -> Self {
        ModQ(0)
    }
    fn one() -> Self {
        ModQ(1 % Q)
    }
    fn from_u64(v: u64) -> Self {
        ModQ(v % Q)
    }
    fn from_u128(v: u128) -> Self {
        ModQ((v % Q as u128) as u64)
    }
    fn invert(&self) -> Option<Self> {
        if self.0 == 0 {
            None
        } else {
            Some(ModQ(pow_mod(self.0, Q - 2, Q)))
        }
    }
    fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        ModQ(rng.gen_range(0..Q))
    }
    fn to_bytes(&self) -> Vec<u8> {
        to_le(self.0, Self::ENCODED_LEN)
    }
    fn from_bytes(bytes: &[u8]) -> Option<Self> {
        from_le(bytes, Self::ENCODED_LEN).filter(|v| *v < Q).map(ModQ)
    }
    fn to_u64(&self) -> Option<u64> {
        Some(self.0)
    }
    fn below_order(v: u64) -> bool {
        v < Q
    }
}

/// A member of the order-`q` subgroup of `Z_P^*`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchnorrElement<const P: u64>(u64);

impl<const P: u64> SchnorrElement<P> {
    pub fn value(self) -> u64 {
        self.0
    }
}

impl<const P: u64> fmt::Debug for SchnorrElement<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

/// The order-`Q` subgroup of `Z_P^*` generated by `G`, with second
/// generator `H` and `LAMBDA`-bit challenges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SchnorrGroup<const P: u64, const Q: u64, const G: u64, const H: u64, const LAMBDA: u32>;

/// `p = 167`, `q = 83`, `g = 4`, `h = 9`, 16-bit challenges.
///
/// Note that `2^16 > q`, so distinct challenges collide once reduced into
/// the exponent; the IsBinary proof is complete but not sound here. Use
/// [`Sound16`] when soundness matters.
pub type Tiny83 = SchnorrGroup<167, 83, 4, 9, 16>;

/// `p = 131267`, `q = 65633 > 2^16`, `g = 4`, `h = 9`, 16-bit challenges.
pub type Sound16 = SchnorrGroup<131267, 65633, 4, 9, 16>;

/// A 61-bit `q` with 32-bit challenges: still toy-sized, but sound enough
/// for simulations that inject invalid ballots, and much faster than
/// Ristretto.
pub type Fast61 = SchnorrGroup<4611686018427377339, 2305843009213688669, 4, 9, 32>;

impl<const P: u64, const Q: u64, const G: u64, const H: u64, const LAMBDA: u32> Group
    for SchnorrGroup<P, Q, G, H, LAMBDA>
{
    type Scalar = ModQ<Q>;
    type Element = SchnorrElement<P>;

    const NAME: &'static str = "schnorr";
    const CHALLENGE_BITS: u32 = LAMBDA;
    const ELEMENT_LEN: usize = byte_len(P - 1);

    fn identity() -> Self::Element {
        SchnorrElement(1)
    }
    fn g() -> Self::Element {
        SchnorrElement(G)
    }
    fn h() -> Self::Element {
        SchnorrElement(H)
    }
    fn op(a: &Self::Element, b: &Self::Element) -> Self::Element {
        SchnorrElement(mul_mod(a.0, b.0, P))
    }
    fn inverse(a: &Self::Element) -> Self::Element {
        // a^q = 1, so a^(q-1) = a^-1.
        SchnorrElement(pow_mod(a.0, Q - 1, P))
    }
    fn exp(base: &Self::Element, e: &Self::Scalar) -> Self::Element {
        count_exps(1);
        SchnorrElement(pow_mod(base.0, e.0, P))
    }
    fn encode(a: &Self::Element) -> Vec<u8> {
        to_le(a.0, Self::ELEMENT_LEN)
    }
    fn decode(bytes: &[u8]) -> Option<Self::Element> {
        let v = from_le(bytes, Self::ELEMENT_LEN)?;
        (v != 0 && v < P && pow_mod(v, Q, P) == 1).then_some(SchnorrElement(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_params<const P: u64, const Q: u64, const G: u64, const H: u64, const L: u32>() {
        assert_eq!(P, 2 * Q + 1);
        for x in [P, Q] {
            let mut d = 2;
            while d * d <= x {
                assert_ne!(x % d, 0, "{x} is not prime");
                d += 1;
            }
        }
        assert_eq!(pow_mod(G, Q, P), 1);
        assert_eq!(pow_mod(H, Q, P), 1);
        assert_ne!(G, 1);
        assert_ne!(H, 1);
    }

    #[test]
    fn parameters_are_safe_primes_with_order_q_generators() {
        check_params::<167, 83, 4, 9, 16>();
        check_params::<131267, 65633, 4, 9, 16>();
        assert!(Sound16::CHALLENGE_BITS < 64 && (1u64 << 16) < 65633);
    }

    #[test]
    fn fast61_generators_have_order_q() {
        let (p, q) = (4611686018427377339u64, 2305843009213688669u64);
        assert_eq!(p, 2 * q + 1);
        assert_eq!(pow_mod(4, q, p), 1);
        assert_eq!(pow_mod(9, q, p), 1);
    }

    #[test]
    fn decode_rejects_non_members() {
        // 5 is a non-residue mod 167, so it lies outside the subgroup.
        assert!(Tiny83::decode(&[5]).is_none());
        assert!(Tiny83::decode(&[0]).is_none());
        assert!(Tiny83::decode(&[167]).is_none());
        assert_eq!(Tiny83::decode(&[4]), Some(SchnorrElement(4)));
        assert!(ModQ::<83>::from_bytes(&[83]).is_none());
        assert!(ModQ::<83>::from_bytes(&[1, 0]).is_none());
    }

    #[test]
    fn encodings_are_fixed_width() {
        assert_eq!(ModQ::<83>::ENCODED_LEN, 1);
        assert_eq!(Tiny83::ELEMENT_LEN, 1);
        assert_eq!(ModQ::<65633>::ENCODED_LEN, 3);
        assert_eq!(Sound16::ELEMENT_LEN, 3);
        assert_eq!(ModQ::<65633>::from_u64(5).to_bytes(), vec![5, 0, 0]);
    }

    #[test]
    fn inverse_and_field_ops() {
        let a = ModQ::<83>::from_u64(5);
        assert_eq!(a * a.invert().unwrap(), ModQ::one());
        assert_eq!(-a + a, ModQ::zero());
        assert_eq!(ModQ::<83>::from_u128(83 * 1000 + 7), ModQ::from_u64(7));
        let e = SchnorrElement::<167>(4);
        assert_eq!(Tiny83::op(&e, &Tiny83::inverse(&e)), Tiny83::identity());
    }
}
