use crate::encoding::{serde_via_canonical, Canonical, DecodeError, Reader};
use crate::group::{Group, Scalar};
use crate::pedersen::{commit, Commitment};
use crate::CryptoError;

/// Pedersen commitments to each coefficient pair of a joint
/// (vote, blinding) sharing. Entry 0 commits to the secret itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorCommitment<G: Group> {
    pub coeffs: Vec<Commitment<G>>,
}

impl<G: Group> VectorCommitment<G> {
    pub fn secret(&self) -> Option<&Commitment<G>> {
        self.coeffs.first()
    }

    /// `prod_j C_j^(x^j)`: the commitment to the share at index `x`.
    pub fn evaluate(&self, x: u64) -> Commitment<G> {
        let x = G::Scalar::from_u64(x);
        let mut power = G::Scalar::one();
        let terms: Vec<_> = self
            .coeffs
            .iter()
            .map(|c| {
                let t = (c.0, power);
                power = power * x;
                t
            })
            .collect();
        Commitment(G::multi_exp(&terms))
    }
}

impl<G: Group> Canonical for VectorCommitment<G> {
    fn to_canonical(&self) -> Vec<u8> {
        let mut out = (self.coeffs.len() as u32).to_le_bytes().to_vec();
        for c in &self.coeffs {
            out.extend(c.to_bytes());
        }
        out
    }

    fn from_canonical(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let len = r.u32()? as usize;
        if len == 0 || len.saturating_mul(G::ELEMENT_LEN) > bytes.len() {
            return Err(DecodeError::Malformed("vector commitment length"));
        }
        let coeffs = (0..len)
            .map(|_| r.element::<G>().map(Commitment))
            .collect::<Result<_, _>>()?;
        r.finish()?;
        Ok(VectorCommitment { coeffs })
    }
}

serde_via_canonical!(VectorCommitment);

/// Coefficientwise `prod_i vc_i^(w_i)`.
pub fn commit_weighted_combine<G: Group>(
    commits: &[(VectorCommitment<G>, u64)],
) -> Result<VectorCommitment<G>, CryptoError> {
    let len = commits.first().ok_or(CryptoError::Empty)?.0.coeffs.len();
    if commits.iter().any(|(vc, _)| vc.coeffs.len() != len) {
        return Err(CryptoError::LengthMismatch);
    }
    let coeffs = (0..len)
        .map(|j| {
            let terms: Vec<_> = commits
                .iter()
                .map(|(vc, w)| (vc.coeffs[j].0, G::Scalar::from_u64(*w)))
                .collect();
            Commitment(G::multi_exp(&terms))
        })
        .collect();
    Ok(VectorCommitment { coeffs })
}

/// True iff `commit(value, blinding) = prod_j C_j^(index^j)`.
pub fn verify_share_against_commitment<G: Group>(
    index: u32,
    value: &G::Scalar,
    blinding: &G::Scalar,
    vc: &VectorCommitment<G>,
) -> bool {
    index != 0 && !vc.coeffs.is_empty() && commit::<G>(value, blinding) == vc.evaluate(index as u64)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;
    use crate::{shamir_share, share_linear_combine, ModQ, Ristretto255, RistrettoScalar, Tiny83};

    type F = ModQ<83>;

    #[test]
    fn dealt_shares_verify_and_perturbed_ones_do_not() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (shares, vc) = shamir_share::<Tiny83, _>(F::one(), F::from_u64(5), 3, 6, &mut rng).unwrap();
        for s in &shares {
            assert!(s.verify(&vc));
            assert!(!verify_share_against_commitment(s.index, &(s.value + F::one()), &s.blinding, &vc));
        }
        assert!(!verify_share_against_commitment(0, &F::one(), &F::from_u64(5), &vc));
    }

    #[test]
    fn ristretto_shares_verify() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (shares, vc) = shamir_share::<Ristretto255, _>(
            RistrettoScalar::one(),
            RistrettoScalar::random(&mut rng),
            2,
            4,
            &mut rng,
        )
        .unwrap();
        assert!(shares.iter().all(|s| s.verify(&vc)));
    }

    #[test]
    fn combined_commitment_verifies_combined_share() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (a, va) = shamir_share::<Tiny83, _>(F::one(), F::from_u64(11), 2, 4, &mut rng).unwrap();
        let (b, vb) = shamir_share::<Tiny83, _>(F::zero(), F::from_u64(20), 2, 4, &mut rng).unwrap();
        let vc = commit_weighted_combine(&[(va.clone(), 5), (vb.clone(), 3)]).unwrap();
        for i in 0..4 {
            let s = share_linear_combine(&[(a[i], 5), (b[i], 3)]).unwrap();
            assert!(s.verify(&vc));
        }
        let zero = commit_weighted_combine(&[(va.clone(), 0), (vb, 0)]).unwrap();
        assert!(zero.coeffs.iter().all(|c| *c == Commitment::identity()));
        assert_eq!(commit_weighted_combine(&[(va.clone(), 1)]).unwrap(), va);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (_, va) = shamir_share::<Tiny83, _>(F::one(), F::one(), 2, 4, &mut rng).unwrap();
        let (_, vb) = shamir_share::<Tiny83, _>(F::one(), F::one(), 3, 4, &mut rng).unwrap();
        assert_eq!(commit_weighted_combine(&[(va, 1), (vb, 1)]), Err(CryptoError::LengthMismatch));
    }

    #[test]
    fn canonical_round_trip_and_rejection() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (_, vc) = shamir_share::<Tiny83, _>(F::one(), F::one(), 2, 4, &mut rng).unwrap();
        let bytes = vc.to_canonical();
        assert_eq!(bytes.len(), 4 + 2);
        assert_eq!(VectorCommitment::<Tiny83>::from_canonical(&bytes).unwrap(), vc);
        assert!(VectorCommitment::<Tiny83>::from_canonical(&bytes[..5]).is_err());
        assert!(VectorCommitment::<Tiny83>::from_canonical(&[0, 0, 0, 0]).is_err());
    }
}
