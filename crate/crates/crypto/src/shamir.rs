use rand::RngCore;

use crate::encoding::{serde_via_canonical, Canonical, DecodeError, Reader};
use crate::group::{Group, Scalar};
use crate::pedersen::commit;
use crate::poly::{interpolate_at, Polynomial};
use crate::vector::VectorCommitment;
use crate::CryptoError;

/// Evaluation of the joint (vote, blinding) polynomials at `index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Share<G: Group> {
    pub index: u32,
    pub value: G::Scalar,
    pub blinding: G::Scalar,
}

impl<G: Group> Share<G> {
    pub fn new(index: u32, value: G::Scalar, blinding: G::Scalar) -> Self {
        Share { index, value, blinding }
    }

    pub fn verify(&self, vc: &VectorCommitment<G>) -> bool {
        crate::verify_share_against_commitment(self.index, &self.value, &self.blinding, vc)
    }
}

impl<G: Group> Canonical for Share<G> {
    fn to_canonical(&self) -> Vec<u8> {
        let mut out = self.index.to_le_bytes().to_vec();
        out.extend(self.value.to_bytes());
        out.extend(self.blinding.to_bytes());
        out
    }

    fn from_canonical(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let share = Share {
            index: r.u32()?,
            value: r.scalar()?,
            blinding: r.scalar()?,
        };
        r.finish()?;
        Ok(share)
    }
}

serde_via_canonical!(Share);

/// A pair of polynomials sharing a secret and its blinding value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dealing<G: Group> {
    pub vote: Polynomial<G::Scalar>,
    pub blinding: Polynomial<G::Scalar>,
}

impl<G: Group> Dealing<G> {
    pub fn random<R: RngCore + ?Sized>(
        secret: G::Scalar,
        blinding: G::Scalar,
        k: usize,
        rng: &mut R,
    ) -> Self {
        Dealing {
            vote: Polynomial::random(secret, k - 1, rng),
            blinding: Polynomial::random(blinding, k - 1, rng),
        }
    }

    pub fn share(&self, index: u32) -> Share<G> {
        Share {
            index,
            value: self.vote.evaluate_at(index as u64),
            blinding: self.blinding.evaluate_at(index as u64),
        }
    }

    pub fn shares(&self, n: usize) -> Vec<Share<G>> {
        (1..=n as u32).map(|i| self.share(i)).collect()
    }

    pub fn commitment(&self) -> VectorCommitment<G> {
        VectorCommitment {
            coeffs: self
                .vote
                .coeffs
                .iter()
                .zip(&self.blinding.coeffs)
                .map(|(f, b)| commit::<G>(f, b))
                .collect(),
        }
    }
}

fn check_params<G: Group>(k: usize, n: usize) -> Result<(), CryptoError> {
    if k == 0 || k > n || !G::Scalar::below_order(n as u64) || n > u32::MAX as usize {
        Err(CryptoError::InvalidParameters { k, n })
    } else {
        Ok(())
    }
}

/// Shares `secret` among `n` parties so that any `k` reconstruct it.
pub fn shamir_share<G: Group, R: RngCore + ?Sized>(
    secret: G::Scalar,
    blinding: G::Scalar,
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<Share<G>>, VectorCommitment<G>), CryptoError> {
    check_params::<G>(k, n)?;
    let dealing = Dealing::<G>::random(secret, blinding, k, rng);
    Ok((dealing.shares(n), dealing.commitment()))
}

/// Recovers `(secret, blinding)` from the first `k` of `shares`.
pub fn interpolate<G: Group>(
    shares: &[Share<G>],
    k: usize,
) -> Result<(G::Scalar, G::Scalar), CryptoError> {
    if k == 0 {
        return Err(CryptoError::InvalidParameters { k, n: shares.len() });
    }
    for (i, s) in shares.iter().enumerate() {
        if s.index == 0 {
            return Err(CryptoError::ZeroIndex);
        }
        if shares[..i].iter().any(|t| t.index == s.index) {
            return Err(CryptoError::DuplicateIndex(s.index));
        }
    }
    if shares.len() < k {
        return Err(CryptoError::NotEnoughShares { needed: k, got: shares.len() });
    }
    let used = &shares[..k];
    let xs: Vec<_> = used.iter().map(|s| G::Scalar::from_u64(s.index as u64)).collect();
    let values: Vec<_> = xs.iter().zip(used).map(|(x, s)| (*x, s.value)).collect();
    let blinds: Vec<_> = xs.iter().zip(used).map(|(x, s)| (*x, s.blinding)).collect();
    let zero = G::Scalar::zero();
    // Indices are distinct and below q, so the Lagrange denominators are invertible.
    Ok((
        interpolate_at(&values, &zero).expect("distinct indices"),
        interpolate_at(&blinds, &zero).expect("distinct indices"),
    ))
}

/// Componentwise `sum w_i * share_i` for shares at a common index.
pub fn share_linear_combine<G: Group>(terms: &[(Share<G>, u64)]) -> Result<Share<G>, CryptoError> {
    let index = terms.first().ok_or(CryptoError::Empty)?.0.index;
    let mut acc = Share::new(index, G::Scalar::zero(), G::Scalar::zero());
    for (s, w) in terms {
        if s.index != index {
            return Err(CryptoError::LengthMismatch);
        }
        let w = G::Scalar::from_u64(*w);
        acc.value = acc.value + w * s.value;
        acc.blinding = acc.blinding + w * s.blinding;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;
    use crate::{ModQ, Tiny83};

    type F = ModQ<83>;

    fn forced() -> Dealing<Tiny83> {
        Dealing {
            vote: Polynomial::new(vec![F::from_u64(1), F::from_u64(2)]),
            blinding: Polynomial::new(vec![F::zero(), F::zero()]),
        }
    }

    #[test]
    fn forced_polynomial_shares() {
        let got: Vec<_> = forced()
            .shares(3)
            .iter()
            .map(|s| (s.index, s.value.value(), s.blinding.value()))
            .collect();
        // 1 + 2i for i = 1, 2, 3.
        assert_eq!(got, vec![(1, 3, 0), (2, 5, 0), (3, 7, 0)]);
    }

    #[test]
    fn two_shares_reconstruct_forced_secret() {
        let shares = forced().shares(2);
        assert_eq!(interpolate(&shares, 2).unwrap(), (F::one(), F::zero()));
    }

    #[test]
    fn degree_zero_sharing_repeats_the_secret() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (shares, vc) = shamir_share::<Tiny83, _>(F::from_u64(9), F::from_u64(4), 1, 5, &mut rng).unwrap();
        assert!(shares.iter().all(|s| s.value == F::from_u64(9)));
        assert_eq!(vc.coeffs.len(), 1);
        assert_eq!(interpolate(&shares[3..4], 1).unwrap(), (F::from_u64(9), F::from_u64(4)));
    }

    #[test]
    fn parameter_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(shamir_share::<Tiny83, _>(F::one(), F::one(), 4, 3, &mut rng).is_err());
        assert!(shamir_share::<Tiny83, _>(F::one(), F::one(), 0, 3, &mut rng).is_err());
        assert!(shamir_share::<Tiny83, _>(F::one(), F::one(), 2, 83, &mut rng).is_err());
        assert!(shamir_share::<Tiny83, _>(F::one(), F::one(), 2, 82, &mut rng).is_ok());
    }

    #[test]
    fn interpolation_errors() {
        let s = forced().shares(3);
        assert_eq!(interpolate(&[s[0], s[0]], 2), Err(CryptoError::DuplicateIndex(1)));
        assert_eq!(
            interpolate(&s[..1], 2),
            Err(CryptoError::NotEnoughShares { needed: 2, got: 1 })
        );
        let zero = vec![Share::<Tiny83>::new(1, F::zero(), F::zero()), Share::new(2, F::zero(), F::zero())];
        assert_eq!(interpolate(&zero, 2).unwrap(), (F::zero(), F::zero()));
    }

    #[test]
    fn linear_combination_edge_cases() {
        let s = forced().share(2);
        assert_eq!(share_linear_combine(&[(s, 1)]).unwrap(), s);
        let z = share_linear_combine(&[(s, 0), (s, 0)]).unwrap();
        assert_eq!((z.value, z.blinding), (F::zero(), F::zero()));
        assert!(share_linear_combine(&[(s, 1), (forced().share(1), 1)]).is_err());
        assert!(share_linear_combine::<Tiny83>(&[]).is_err());
    }

    #[test]
    fn canonical_encoding_round_trip() {
        let s = forced().share(3);
        assert_eq!(s.to_canonical(), vec![3, 0, 0, 0, 7, 0]);
        assert_eq!(Share::<Tiny83>::from_canonical(&s.to_canonical()).unwrap(), s);
        assert!(Share::<Tiny83>::from_canonical(&[3, 0, 0, 0, 83, 0]).is_err());
    }
}
