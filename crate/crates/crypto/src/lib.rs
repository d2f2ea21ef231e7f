//! Cryptographic core of the Privocracy authorization engine.
//!
//! Everything here is generic over a [`Group`]: a cyclic group of prime
//! order `q` with two generators `g` and `h` whose relative discrete log is
//! unknown. Two families are provided:
//!
//! * [`Ristretto255`] — the production group.
//! * [`SchnorrGroup`] — tiny prime-order subgroups of `Z_p^*`, small enough
//!   that tests can enumerate every exponent. [`Tiny83`] is the canonical
//!   oracle group; [`Sound16`] has `q > 2^16` so that 16-bit challenges are
//!   distinct modulo `q`.
//!
//! On top of the group sit Pedersen [`Commitment`]s, Shamir [`Share`]s with
//! a Feldman-style [`VectorCommitment`], the symmetric bivariate dealing
//! used by asynchronous VSS, and the [`BinaryProof`] disjunctive
//! zero-knowledge proof that a committed value is 0 or 1.

mod bivariate;
mod encoding;
mod group;
mod isbinary;
mod pedersen;
mod poly;
mod ristretto;
mod schnorr;
mod shamir;
mod vector;

pub use bivariate::{MatrixCommitment, RowPolynomials, SymmetricDealing};
pub use encoding::{scalar_hex, Canonical, DecodeError};
pub use group::{exp_count, reset_exp_count, Group, Scalar};
pub use isbinary::{branch_holds, challenge_hash, BinaryProof, Challenge, ISBINARY_DOMAIN};
pub use pedersen::{commit, Commitment};
pub use poly::{interpolate_at, Polynomial};
pub use ristretto::{Ristretto255, RistrettoScalar};
pub use schnorr::{Fast61, ModQ, SchnorrElement, SchnorrGroup, Sound16, Tiny83};
pub use shamir::{interpolate, share_linear_combine, shamir_share, Dealing, Share};
pub use vector::{commit_weighted_combine, verify_share_against_commitment, VectorCommitment};

/// Errors raised by the cryptographic layer.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("invalid sharing parameters: k={k}, n={n}")]
    InvalidParameters { k: usize, n: usize },
    #[error("need at least {needed} shares, got {got}")]
    NotEnoughShares { needed: usize, got: usize },
    #[error("duplicate share index {0}")]
    DuplicateIndex(u32),
    #[error("share index 0 is reserved for the secret")]
    ZeroIndex,
    #[error("vector commitments have different lengths")]
    LengthMismatch,
    #[error("empty input")]
    Empty,
    #[error("value {0} is not a bit")]
    NotBinary(u64),
}
