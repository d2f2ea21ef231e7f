use crate::encoding::{serde_via_canonical, Canonical, DecodeError, Reader};
use crate::group::Group;

/// A Pedersen commitment `g^x h^r`: perfectly hiding, computationally
/// binding under the discrete-log assumption.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Commitment<G: Group>(pub G::Element);

pub fn commit<G: Group>(x: &G::Scalar, r: &G::Scalar) -> Commitment<G> {
    Commitment(G::multi_exp(&[(G::g(), *x), (G::h(), *r)]))
}

impl<G: Group> Commitment<G> {
    pub fn identity() -> Self {
        Commitment(G::identity())
    }

    /// Homomorphic addition of the committed values and blindings.
    pub fn combine(&self, other: &Self) -> Self {
        Commitment(G::op(&self.0, &other.0))
    }

    /// Commitment to `w*x` under blinding `w*r`.
    pub fn scale(&self, w: &G::Scalar) -> Self {
        Commitment(G::exp(&self.0, w))
    }

    pub fn inverse(&self) -> Self {
        Commitment(G::inverse(&self.0))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        G::encode(&self.0)
    }
}

impl<G: Group> Canonical for Commitment<G> {
    fn to_canonical(&self) -> Vec<u8> {
        self.to_bytes()
    }

    fn from_canonical(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let e = r.element::<G>()?;
        r.finish()?;
        Ok(Commitment(e))
    }
}

serde_via_canonical!(Commitment);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{ModQ, Scalar, Tiny83};

    fn naive_pow(b: u64, e: u64, p: u64) -> u64 {
        (0..e).fold(1, |acc, _| acc * b % p)
    }

    #[test]
    fn tiny_commitment_matches_naive_arithmetic() {
        let expected = naive_pow(4, 2, 167) * naive_pow(9, 3, 167) % 167;
        let c = commit::<Tiny83>(&ModQ::from_u64(2), &ModQ::from_u64(3));
        assert_eq!(c.0.value(), expected);
        assert_eq!(expected, 141);
    }

    #[test]
    fn every_tiny_commitment_is_an_order_q_element() {
        for x in 0..83 {
            for r in (0..83).step_by(7) {
                let c = commit::<Tiny83>(&ModQ::from_u64(x), &ModQ::from_u64(r));
                assert_eq!(naive_pow(c.0.value(), 83, 167), 1);
            }
        }
    }

    #[test]
    fn commitment_to_value_and_its_negation_is_identity() {
        let x = ModQ::<83>::from_u64(17);
        let r = ModQ::<83>::from_u64(40);
        let c = commit::<Tiny83>(&x, &r).combine(&commit::<Tiny83>(&-x, &-r));
        assert_eq!(c, Commitment::identity());
    }

    #[test]
    fn serde_round_trip() {
        let c = commit::<Tiny83>(&ModQ::from_u64(2), &ModQ::from_u64(3));
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, "\"8d\"");
        assert_eq!(serde_json::from_str::<Commitment<Tiny83>>(&s).unwrap(), c);
        assert!(serde_json::from_str::<Commitment<Tiny83>>("\"05\"").is_err());
    }
}
