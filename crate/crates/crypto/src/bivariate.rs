//! Symmetric bivariate dealing for asynchronous verifiable secret sharing.
//!
//! The dealer picks symmetric `phi(x, y)` and `psi(x, y)` of degree `d` in
//! each variable whose restriction to `y = 0` is an ordinary Shamir sharing.
//! Party `i` receives the row `phi(i, .)`, `psi(i, .)`; its Shamir share is
//! the row evaluated at zero. Because `phi(i, j) = phi(j, i)`, any `d + 1`
//! parties can hand a missing party enough points to rebuild its row.

use rand::RngCore;

use crate::encoding::{serde_via_canonical, Canonical, DecodeError, Reader};
use crate::group::{Group, Scalar};
use crate::pedersen::{commit, Commitment};
use crate::poly::Polynomial;
use crate::shamir::{Dealing, Share};
use crate::vector::VectorCommitment;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetricDealing<G: Group> {
    phi: Vec<Vec<G::Scalar>>,
    psi: Vec<Vec<G::Scalar>>,
}

/// One party's row: the univariate polynomials `phi(i, .)` and `psi(i, .)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowPolynomials<G: Group> {
    pub vote: Polynomial<G::Scalar>,
    pub blinding: Polynomial<G::Scalar>,
}

/// Commitments `C_kl = g^phi_kl h^psi_kl` to every coefficient, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixCommitment<G: Group> {
    size: usize,
    entries: Vec<Commitment<G>>,
}

fn symmetric<S: Scalar, R: RngCore + ?Sized>(column: &[S], rng: &mut R) -> Vec<Vec<S>> {
    let n = column.len();
    let mut m = vec![vec![S::zero(); n]; n];
    for k in 0..n {
        m[k][0] = column[k];
        m[0][k] = column[k];
    }
    for k in 1..n {
        for l in k..n {
            let v = S::random(rng);
            m[k][l] = v;
            m[l][k] = v;
        }
    }
    m
}

fn row_of<S: Scalar>(m: &[Vec<S>], i: u32) -> Polynomial<S> {
    let x = S::from_u64(i as u64);
    let coeffs = (0..m.len())
        .map(|l| m.iter().rev().fold(S::zero(), |acc, r| acc * x + r[l]))
        .collect();
    Polynomial::new(coeffs)
}

impl<G: Group> SymmetricDealing<G> {
    /// Extends a univariate dealing to a symmetric bivariate one.
    pub fn extend<R: RngCore + ?Sized>(dealing: &Dealing<G>, rng: &mut R) -> Self {
        SymmetricDealing {
            phi: symmetric(&dealing.vote.coeffs, rng),
            psi: symmetric(&dealing.blinding.coeffs, rng),
        }
    }

    /// Builds a dealing from explicit coefficient matrices, which must be
    /// square, of equal size and symmetric.
    pub fn from_matrices(phi: Vec<Vec<G::Scalar>>, psi: Vec<Vec<G::Scalar>>) -> Option<Self> {
        let ok = |m: &Vec<Vec<G::Scalar>>| {
            !m.is_empty()
                && m.len() == phi.len()
                && m.iter().all(|r| r.len() == m.len())
                && (0..m.len()).all(|k| (0..k).all(|l| m[k][l] == m[l][k]))
        };
        (ok(&phi) && ok(&psi)).then_some(SymmetricDealing { phi, psi })
    }

    pub fn degree(&self) -> usize {
        self.phi.len() - 1
    }

    pub fn row(&self, i: u32) -> RowPolynomials<G> {
        RowPolynomials {
            vote: row_of(&self.phi, i),
            blinding: row_of(&self.psi, i),
        }
    }

    pub fn commitment(&self) -> MatrixCommitment<G> {
        let size = self.phi.len();
        let mut entries = Vec::with_capacity(size * size);
        for k in 0..size {
            for l in 0..size {
                entries.push(commit::<G>(&self.phi[k][l], &self.psi[k][l]));
            }
        }
        MatrixCommitment { size, entries }
    }
}

impl<G: Group> RowPolynomials<G> {
    /// The point `(phi(i, j), psi(i, j))` this row's owner sends to party `j`.
    pub fn point(&self, j: u32) -> (G::Scalar, G::Scalar) {
        (self.vote.evaluate_at(j as u64), self.blinding.evaluate_at(j as u64))
    }

    /// The owner's Shamir share: the row at zero.
    pub fn share(&self, owner: u32) -> Share<G> {
        let (value, blinding) = self.point(0);
        Share::new(owner, value, blinding)
    }
}

impl<G: Group> Canonical for RowPolynomials<G> {
    fn to_canonical(&self) -> Vec<u8> {
        let mut out = (self.vote.coeffs.len() as u32).to_le_bytes().to_vec();
        for (a, b) in self.vote.coeffs.iter().zip(&self.blinding.coeffs) {
            out.extend(a.to_bytes());
            out.extend(b.to_bytes());
        }
        out
    }

    fn from_canonical(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let len = r.u32()? as usize;
        if len == 0 || len.saturating_mul(2 * G::Scalar::ENCODED_LEN) > bytes.len() {
            return Err(DecodeError::Malformed("row length"));
        }
        let mut vote = Vec::with_capacity(len);
        let mut blinding = Vec::with_capacity(len);
        for _ in 0..len {
            vote.push(r.scalar()?);
            blinding.push(r.scalar()?);
        }
        r.finish()?;
        Ok(RowPolynomials {
            vote: Polynomial::new(vote),
            blinding: Polynomial::new(blinding),
        })
    }
}

serde_via_canonical!(RowPolynomials);

impl<G: Group> MatrixCommitment<G> {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, k: usize, l: usize) -> &Commitment<G> {
        &self.entries[k * self.size + l]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|k| (k + 1..self.size).all(|l| self.get(k, l) == self.get(l, k)))
    }

    /// The Feldman-style commitment to the underlying Shamir sharing.
    pub fn column_zero(&self) -> VectorCommitment<G> {
        VectorCommitment {
            coeffs: (0..self.size).map(|k| *self.get(k, 0)).collect(),
        }
    }

    /// Commitments `R_il = prod_k C_kl^(i^k)` to the coefficients of row `i`.
    pub fn row_commitment(&self, i: u32) -> VectorCommitment<G> {
        let x = G::Scalar::from_u64(i as u64);
        let coeffs = (0..self.size)
            .map(|l| {
                let mut power = G::Scalar::one();
                let terms: Vec<_> = (0..self.size)
                    .map(|k| {
                        let t = (self.get(k, l).0, power);
                        power = power * x;
                        t
                    })
                    .collect();
                Commitment(G::multi_exp(&terms))
            })
            .collect();
        VectorCommitment { coeffs }
    }

    pub fn verify_row(&self, i: u32, row: &RowPolynomials<G>) -> bool {
        if row.vote.coeffs.len() != self.size || row.blinding.coeffs.len() != self.size {
            return false;
        }
        let rc = self.row_commitment(i);
        row.vote
            .coeffs
            .iter()
            .zip(&row.blinding.coeffs)
            .zip(&rc.coeffs)
            .all(|((a, b), c)| commit::<G>(a, b) == *c)
    }
}

impl<G: Group> Canonical for MatrixCommitment<G> {
    fn to_canonical(&self) -> Vec<u8> {
        let mut out = (self.size as u32).to_le_bytes().to_vec();
        for c in &self.entries {
            out.extend(c.to_bytes());
        }
        out
    }

    fn from_canonical(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let size = r.u32()? as usize;
        let count = size.saturating_mul(size);
        if size == 0 || count.saturating_mul(G::ELEMENT_LEN) > bytes.len() {
            return Err(DecodeError::Malformed("matrix size"));
        }
        let entries = (0..count)
            .map(|_| r.element::<G>().map(Commitment))
            .collect::<Result<_, _>>()?;
        r.finish()?;
        Ok(MatrixCommitment { size, entries })
    }
}

serde_via_canonical!(MatrixCommitment);
