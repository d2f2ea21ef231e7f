use std::cell::Cell;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use rand::RngCore;

thread_local! {
    static EXPS: Cell<u64> = const { Cell::new(0) };
}

/// Number of group exponentiations performed on this thread so far.
///
/// Multi-exponentiations count one per base. The simulator reads this to
/// charge CPU time to the process that did the work.
pub fn exp_count() -> u64 {
    EXPS.with(|c| c.get())
}

pub fn reset_exp_count() {
    EXPS.with(|c| c.set(0));
}

pub(crate) fn count_exps(n: usize) {
    EXPS.with(|c| c.set(c.get() + n as u64));
}

/// An element of `Z_q`.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Eq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    /// Width of the canonical little-endian encoding.
    const ENCODED_LEN: usize;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_u64(v: u64) -> Self;
    /// Reduces `v` modulo `q`.
    fn from_u128(v: u128) -> Self;
    fn invert(&self) -> Option<Self>;
    fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self;
    fn to_bytes(&self) -> Vec<u8>;
    /// Rejects non-canonical encodings (wrong width or `>= q`).
    fn from_bytes(bytes: &[u8]) -> Option<Self>;
    /// The canonical representative, if it fits in a `u64`.
    fn to_u64(&self) -> Option<u64>;
    /// True when `v < q`, i.e. `v` is a usable evaluation index.
    fn below_order(v: u64) -> bool;

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    fn pow(&self, mut e: u64) -> Self {
        let mut base = *self;
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
}

/// A cyclic group of prime order `q` with independent generators `g`, `h`.
///
/// The group is written multiplicatively regardless of the backend.
pub trait Group: Copy + Debug + Default + PartialEq + Eq + Send + Sync + 'static {
    type Scalar: Scalar;
    type Element: Copy + Debug + PartialEq + Eq + Send + Sync + 'static;

    const NAME: &'static str;
    /// Fiat–Shamir challenge length in bits (at most 128).
    const CHALLENGE_BITS: u32;
    const ELEMENT_LEN: usize;

    fn identity() -> Self::Element;
    fn g() -> Self::Element;
    fn h() -> Self::Element;
    fn op(a: &Self::Element, b: &Self::Element) -> Self::Element;
    fn inverse(a: &Self::Element) -> Self::Element;
    /// `base^e`. Counted by [`exp_count`].
    fn exp(base: &Self::Element, e: &Self::Scalar) -> Self::Element;
    fn encode(a: &Self::Element) -> Vec<u8>;
    /// Rejects encodings that are not canonical members of the group.
    fn decode(bytes: &[u8]) -> Option<Self::Element>;

    /// `prod base_i^e_i`.
    fn multi_exp(terms: &[(Self::Element, Self::Scalar)]) -> Self::Element {
        terms
            .iter()
            .fold(Self::identity(), |acc, (b, e)| Self::op(&acc, &Self::exp(b, e)))
    }
}
