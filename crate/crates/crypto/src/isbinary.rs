//! Non-interactive proof that a Pedersen commitment opens to 0 or 1.
//!
//! This is the classic OR composition of two Schnorr proofs of knowledge
//! of `log_h(C g^-b)` for `b in {0, 1}`, made non-interactive with
//! Fiat–Shamir. The challenge is split with XOR over `λ`-bit strings;
//! each half is reduced mod `q` when used as an exponent.
//!
//! Transcript hash (SHA-256):
//!
//! ```text
//! "privocracy-isbinary-v1" || len(C) || C || len(t0) || t0 || len(t1) || t1
//! ```
//!
//! with each `len` a 4-byte little-endian count. The challenge is the first
//! 16 digest bytes read as a little-endian `u128`, masked to `λ` bits.
//!
//! Proof encoding: `t0 || t1 || c0 || c1 || z0 || z1`, challenges as
//! `λ/8`-byte little-endian strings.

use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::encoding::{serde_via_canonical, Canonical, DecodeError, Reader};
use crate::group::{Group, Scalar};
use crate::pedersen::Commitment;
use crate::CryptoError;

pub const ISBINARY_DOMAIN: &[u8] = b"privocracy-isbinary-v1";

/// A `λ`-bit challenge string.
pub type Challenge = u128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinaryProof<G: Group> {
    pub t0: G::Element,
    pub t1: G::Element,
    pub c0: Challenge,
    pub c1: Challenge,
    pub z0: G::Scalar,
    pub z1: G::Scalar,
}

fn mask<G: Group>() -> Challenge {
    if G::CHALLENGE_BITS >= 128 {
        u128::MAX
    } else {
        (1u128 << G::CHALLENGE_BITS) - 1
    }
}

fn challenge_len<G: Group>() -> usize {
    (G::CHALLENGE_BITS as usize + 7) / 8
}

fn random_challenge<G: Group, R: RngCore + ?Sized>(rng: &mut R) -> Challenge {
    let mut b = [0u8; 16];
    rng.fill_bytes(&mut b);
    u128::from_le_bytes(b) & mask::<G>()
}

/// `H(C, t0, t1)` truncated to `λ` bits.
pub fn challenge_hash<G: Group>(c: &Commitment<G>, t0: &G::Element, t1: &G::Element) -> Challenge {
    let mut h = Sha256::new();
    h.update(ISBINARY_DOMAIN);
    for part in [G::encode(&c.0), G::encode(t0), G::encode(t1)] {
        h.update((part.len() as u32).to_le_bytes());
        h.update(&part);
    }
    let digest = h.finalize();
    u128::from_le_bytes(digest[..16].try_into().unwrap()) & mask::<G>()
}

/// `C g^-b`, the statement of branch `b`.
fn statement<G: Group>(c: &Commitment<G>, b: u8) -> G::Element {
    if b == 0 {
        c.0
    } else {
        G::op(&c.0, &G::inverse(&G::g()))
    }
}

/// The verifier equation of one branch: `h^z = t * (C g^-b)^ch`.
pub fn branch_holds<G: Group>(
    c: &Commitment<G>,
    b: u8,
    t: &G::Element,
    ch: Challenge,
    z: &G::Scalar,
) -> bool {
    let lhs = G::exp(&G::h(), z);
    let rhs = G::op(t, &G::exp(&statement(c, b), &G::Scalar::from_u128(ch)));
    lhs == rhs
}

impl<G: Group> BinaryProof<G> {
    /// Proves that `c = commit(x, r)` with `x in {0, 1}`.
    pub fn prove<R: RngCore + ?Sized>(
        x: &G::Scalar,
        r: &G::Scalar,
        c: &Commitment<G>,
        rng: &mut R,
    ) -> Result<Self, CryptoError> {
        if *x != G::Scalar::zero() && *x != G::Scalar::one() {
            return Err(CryptoError::NotBinary(x.to_u64().unwrap_or(u64::MAX)));
        }
        Ok(Self::prove_unchecked(x, r, c, rng))
    }

    /// The prover with the `x in {0, 1}` guard removed. A nonzero `x` is
    /// treated as a claim of 1. Only useful for injecting faults.
    pub fn prove_unchecked<R: RngCore + ?Sized>(
        x: &G::Scalar,
        r: &G::Scalar,
        c: &Commitment<G>,
        rng: &mut R,
    ) -> Self {
        let real: u8 = if x.is_zero() { 0 } else { 1 };
        let sim = 1 - real;

        let k = G::Scalar::random(rng);
        let t_real = G::exp(&G::h(), &k);

        let c_sim = random_challenge::<G, _>(rng);
        let z_sim = G::Scalar::random(rng);
        let t_sim = G::op(
            &G::exp(&G::h(), &z_sim),
            &G::inverse(&G::exp(&statement(c, sim), &G::Scalar::from_u128(c_sim))),
        );

        let (t0, t1) = if real == 0 { (t_real, t_sim) } else { (t_sim, t_real) };
        let c_real = challenge_hash(c, &t0, &t1) ^ c_sim;
        let z_real = k + G::Scalar::from_u128(c_real) * *r;

        if real == 0 {
            BinaryProof { t0, t1, c0: c_real, c1: c_sim, z0: z_real, z1: z_sim }
        } else {
            BinaryProof { t0, t1, c0: c_sim, c1: c_real, z0: z_sim, z1: z_real }
        }
    }

    pub fn verify(&self, c: &Commitment<G>) -> bool {
        let m = mask::<G>();
        self.c0 & !m == 0
            && self.c1 & !m == 0
            && challenge_hash(c, &self.t0, &self.t1) == self.c0 ^ self.c1
            && branch_holds(c, 0, &self.t0, self.c0, &self.z0)
            && branch_holds(c, 1, &self.t1, self.c1, &self.z1)
    }
}

impl<G: Group> Canonical for BinaryProof<G> {
    fn to_canonical(&self) -> Vec<u8> {
        let cl = challenge_len::<G>();
        let mut out = G::encode(&self.t0);
        out.extend(G::encode(&self.t1));
        out.extend(&self.c0.to_le_bytes()[..cl]);
        out.extend(&self.c1.to_le_bytes()[..cl]);
        out.extend(self.z0.to_bytes());
        out.extend(self.z1.to_bytes());
        out
    }

    fn from_canonical(bytes: &[u8]) -> Result<Self, DecodeError> {
        let cl = challenge_len::<G>();
        let mut r = Reader::new(bytes);
        let t0 = r.element::<G>()?;
        let t1 = r.element::<G>()?;
        let read_challenge = |r: &mut Reader| -> Result<Challenge, DecodeError> {
            let mut buf = [0u8; 16];
            buf[..cl].copy_from_slice(r.take(cl)?);
            let v = u128::from_le_bytes(buf);
            if v & !mask::<G>() != 0 {
                return Err(DecodeError::Malformed("challenge exceeds λ bits"));
            }
            Ok(v)
        };
        let c0 = read_challenge(&mut r)?;
        let c1 = read_challenge(&mut r)?;
        let z0 = r.scalar()?;
        let z1 = r.scalar()?;
        r.finish()?;
        Ok(BinaryProof { t0, t1, c0, c1, z0, z1 })
    }
}

serde_via_canonical!(BinaryProof);
