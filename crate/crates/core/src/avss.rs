//! Asynchronous verifiable secret sharing of a (vote, blinding) pair.
//!
//! The dealer extends a degree-`f` Shamir dealing to a symmetric bivariate
//! one, reliably broadcasts the coefficient commitment matrix, and sends
//! each process `i` its row. A process holding a row that checks out
//! against the matrix sends every `j` the point `row_i(j)`; by symmetry
//! that is a point on `j`'s row, verifiable against the matrix. A process
//! without a valid row rebuilds it from `f+1` verified points and then
//! sends its own points. `2f+1` verified points complete the instance with
//! the Shamir share `row_i(0)` and the column-zero vector commitment.

use std::collections::{BTreeMap, BTreeSet};

use privocracy_crypto::{
    interpolate_at, scalar_hex, verify_share_against_commitment, Canonical, Dealing, Group,
    MatrixCommitment, RowPolynomials, Scalar, Share, SymmetricDealing, VectorCommitment,
};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::brb::{Brb, BrbMessage};
use crate::ids::{Membership, ProcessId};
use crate::step::{Step, Target};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", bound = "")]
pub enum AvssMessage<G: Group> {
    /// Reliable broadcast of the commitment matrix.
    Commitment { brb: BrbMessage },
    /// The dealer's private row for the recipient.
    Row { row: RowPolynomials<G> },
    /// `row_sender(recipient)`.
    Point {
        #[serde(with = "scalar_hex")]
        value: G::Scalar,
        #[serde(with = "scalar_hex")]
        blinding: G::Scalar,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AvssOutput<G: Group> {
    pub share: Share<G>,
    pub commitment: VectorCommitment<G>,
}

pub type AvssStep<G> = Step<AvssMessage<G>, AvssOutput<G>>;

type Point<G> = (<G as Group>::Scalar, <G as Group>::Scalar);

#[derive(Clone, Debug)]
pub struct Avss<G: Group> {
    m: Membership,
    dealer: ProcessId,
    dealt: bool,
    brb: Brb,
    matrix: Option<MatrixCommitment<G>>,
    matrix_invalid: bool,
    my_row_commitment: Option<VectorCommitment<G>>,
    row_received: bool,
    pending_row: Option<RowPolynomials<G>>,
    /// `row_me(j)` for `j in 0..=n`, once the row is known.
    evals: Option<Vec<Point<G>>>,
    point_senders: BTreeSet<ProcessId>,
    pending_points: BTreeMap<ProcessId, Point<G>>,
    points: BTreeMap<ProcessId, Point<G>>,
    output: Option<AvssOutput<G>>,
}

impl<G: Group> Avss<G> {
    pub fn new(m: Membership, dealer: ProcessId) -> Self {
        Avss {
            m,
            dealer,
            dealt: false,
            brb: Brb::new(m, dealer),
            matrix: None,
            matrix_invalid: false,
            my_row_commitment: None,
            row_received: false,
            pending_row: None,
            evals: None,
            point_senders: BTreeSet::new(),
            pending_points: BTreeMap::new(),
            points: BTreeMap::new(),
            output: None,
        }
    }

    pub fn dealer(&self) -> ProcessId {
        self.dealer
    }

    pub fn output(&self) -> Option<&AvssOutput<G>> {
        self.output.as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.output.is_some()
    }

    /// Shares `(vote, blinding)` with a fresh degree-`f` dealing.
    pub fn share<R: RngCore + ?Sized>(
        &mut self,
        vote: G::Scalar,
        blinding: G::Scalar,
        rng: &mut R,
    ) -> Result<AvssStep<G>, Error> {
        let dealing = Dealing::<G>::random(vote, blinding, self.m.f + 1, rng);
        self.deal(&SymmetricDealing::extend(&dealing, rng))
    }

    /// Deals a prepared bivariate dealing. Exposed so tests and fault
    /// injection can control the polynomials.
    pub fn deal(&mut self, dealing: &SymmetricDealing<G>) -> Result<AvssStep<G>, Error> {
        if self.m.me != self.dealer {
            return Err(Error::NotOriginator);
        }
        if self.dealt {
            return Err(Error::DuplicateBroadcast);
        }
        if dealing.degree() != self.m.f {
            return Err(Error::Crypto(privocracy_crypto::CryptoError::InvalidParameters {
                k: dealing.degree() + 1,
                n: self.m.n,
            }));
        }
        self.dealt = true;
        let mut step = self
            .brb
            .broadcast(dealing.commitment().to_canonical())?
            .map(|brb| AvssMessage::Commitment { brb }, |_| unreachable!());
        for j in self.m.ids() {
            step.send(Target::Node(j), AvssMessage::Row { row: dealing.row(j.0) });
        }
        Ok(step)
    }

    pub fn handle(&mut self, from: ProcessId, msg: AvssMessage<G>) -> AvssStep<G> {
        let mut step = Step::default();
        if !self.m.contains(from) || self.matrix_invalid {
            return step;
        }
        match msg {
            AvssMessage::Commitment { brb } => {
                let mut s = self.brb.handle(from, brb);
                let delivered = std::mem::take(&mut s.output).into_iter().next();
                step.extend(s.map(|brb| AvssMessage::Commitment { brb }, |_| unreachable!()));
                if let Some(bytes) = delivered {
                    self.on_matrix(&bytes, &mut step);
                }
            }
            AvssMessage::Row { row } => {
                if from != self.dealer || self.row_received {
                    return step;
                }
                self.row_received = true;
                if self.matrix.is_some() {
                    self.on_row(row, &mut step);
                } else {
                    self.pending_row = Some(row);
                }
            }
            AvssMessage::Point { value, blinding } => {
                if !self.point_senders.insert(from) {
                    return step;
                }
                if self.matrix.is_some() {
                    self.on_point(from, (value, blinding), &mut step);
                } else {
                    self.pending_points.insert(from, (value, blinding));
                }
            }
        }
        step
    }

    fn on_matrix(&mut self, bytes: &[u8], step: &mut AvssStep<G>) {
        match MatrixCommitment::<G>::from_canonical(bytes) {
            Ok(mc) if mc.size() == self.m.f + 1 && mc.is_symmetric() => {
                self.my_row_commitment = Some(mc.row_commitment(self.m.me.0));
                self.matrix = Some(mc);
            }
            _ => {
                // Every correct process delivers the same bytes, so all of
                // them reject the dealer together.
                self.matrix_invalid = true;
                return;
            }
        }
        if let Some(row) = self.pending_row.take() {
            self.on_row(row, step);
        }
        for (from, p) in std::mem::take(&mut self.pending_points) {
            self.on_point(from, p, step);
        }
    }

    fn on_row(&mut self, row: RowPolynomials<G>, step: &mut AvssStep<G>) {
        if self.evals.is_some() {
            return;
        }
        if self.matrix.as_ref().unwrap().verify_row(self.m.me.0, &row) {
            let evals = (0..=self.m.n as u32).map(|j| row.point(j)).collect();
            self.set_row(evals, step);
        }
    }

    fn on_point(&mut self, from: ProcessId, p: Point<G>, step: &mut AvssStep<G>) {
        let rc = self.my_row_commitment.as_ref().unwrap();
        if !verify_share_against_commitment(from.0, &p.0, &p.1, rc) {
            return;
        }
        self.points.insert(from, p);
        if self.evals.is_none() && self.points.len() > self.m.f {
            let (xs, ys): (Vec<_>, Vec<_>) = self
                .points
                .iter()
                .take(self.m.f + 1)
                .map(|(j, (v, b))| {
                    let x = G::Scalar::from_u64(j.0 as u64);
                    ((x, *v), (x, *b))
                })
                .unzip();
            let evals = (0..=self.m.n as u64)
                .map(|j| {
                    let at = G::Scalar::from_u64(j);
                    (
                        interpolate_at(&xs, &at).expect("distinct senders"),
                        interpolate_at(&ys, &at).expect("distinct senders"),
                    )
                })
                .collect();
            self.set_row(evals, step);
        }
        self.try_complete(step);
    }

    fn set_row(&mut self, evals: Vec<Point<G>>, step: &mut AvssStep<G>) {
        for j in self.m.ids() {
            let (value, blinding) = evals[j.0 as usize];
            step.send(Target::Node(j), AvssMessage::Point { value, blinding });
        }
        self.evals = Some(evals);
        self.try_complete(step);
    }

    fn try_complete(&mut self, step: &mut AvssStep<G>) {
        if self.output.is_some() || self.points.len() <= 2 * self.m.f {
            return;
        }
        if let Some(evals) = &self.evals {
            let (value, blinding) = evals[0];
            let out = AvssOutput {
                share: Share::new(self.m.me.0, value, blinding),
                commitment: self.matrix.as_ref().unwrap().column_zero(),
            };
            debug_assert!(out.share.verify(&out.commitment));
            self.output = Some(out.clone());
            step.output.push(out);
        }
    }

    pub fn footprint(&self) -> usize {
        let scalar = G::Scalar::ENCODED_LEN;
        let elem = G::ELEMENT_LEN;
        let size = self.m.f + 1;
        96 + self.brb.footprint()
            + self.matrix.as_ref().map_or(0, |_| size * size * elem)
            + self.my_row_commitment.as_ref().map_or(0, |_| size * elem)
            + self.evals.as_ref().map_or(0, |e| e.len() * 2 * scalar)
            + (self.points.len() + self.pending_points.len()) * (2 * scalar + 16)
            + self.point_senders.len() * 8
            + self.pending_row.as_ref().map_or(0, |_| size * 2 * scalar)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;

    use privocracy_crypto::{interpolate, ModQ, Tiny83};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;

    type F = ModQ<83>;

    fn deliver(nodes: &mut [Avss<Tiny83>], queue: &mut VecDeque<(u32, Target, AvssMessage<Tiny83>)>, drop_to: &[u32]) {
        let n = nodes.len() as u32;
        while let Some((from, target, msg)) = queue.pop_front() {
            let targets: Vec<u32> = match target {
                Target::All => (1..=n).collect(),
                Target::Node(p) => vec![p.0],
            };
            for t in targets {
                if matches!(msg, AvssMessage::Row { .. }) && drop_to.contains(&t) {
                    continue;
                }
                let s = nodes[t as usize - 1].handle(ProcessId(from), msg.clone());
                queue.extend(s.messages.into_iter().map(|m| (t, m.target, m.message)));
            }
        }
    }

    fn setup(n: usize, f: usize) -> Vec<Avss<Tiny83>> {
        (1..=n as u32).map(|i| Avss::new(Membership::new(n, f, ProcessId(i)), ProcessId(1))).collect()
    }

    #[test]
    fn honest_dealer_all_complete_with_consistent_shares() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut nodes = setup(4, 1);
        let step = nodes[0].share(F::one(), F::from_u64(40), &mut rng).unwrap();
        let mut q: VecDeque<_> = step.messages.into_iter().map(|m| (1, m.target, m.message)).collect();
        deliver(&mut nodes, &mut q, &[]);
        let shares: Vec<_> = nodes.iter().map(|a| a.output().unwrap().share).collect();
        assert_eq!(interpolate(&shares[2..], 2).unwrap(), (F::one(), F::from_u64(40)));
    }

    #[test]
    fn processes_without_rows_recover_them() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut nodes = setup(7, 2);
        let step = nodes[0].share(F::zero(), F::from_u64(3), &mut rng).unwrap();
        let mut q: VecDeque<_> = step.messages.into_iter().map(|m| (1, m.target, m.message)).collect();
        deliver(&mut nodes, &mut q, &[3, 6]);
        let shares: Vec<_> = nodes.iter().map(|a| a.output().unwrap().share).collect();
        assert_eq!(interpolate(&[shares[2], shares[5], shares[6]], 3).unwrap().0, F::zero());
        assert_eq!(interpolate(&shares[..3], 3).unwrap(), (F::zero(), F::from_u64(3)));
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let mut nodes = setup(4, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let d1 = SymmetricDealing::extend(&Dealing::<Tiny83>::random(F::one(), F::one(), 2, &mut rng), &mut rng);
        let mut bytes = d1.commitment().to_canonical();
        // Swap entries (0,1) and (1,0) for unequal ones.
        bytes[5] = Tiny83::encode(&Tiny83::g())[0];
        bytes[6] = Tiny83::encode(&Tiny83::h())[0];
        let mut q = VecDeque::from([(1, Target::All, AvssMessage::Commitment { brb: BrbMessage::Send(bytes) })]);
        deliver(&mut nodes, &mut q, &[]);
        assert!(nodes.iter().all(|a| a.matrix_invalid));
    }

    #[test]
    fn wire_form_is_self_describing() {
        let m: AvssMessage<Tiny83> = AvssMessage::Point { value: F::from_u64(10), blinding: F::from_u64(11) };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"type":"point","value":"0a","blinding":"0b"}"#);
        assert_eq!(serde_json::from_str::<AvssMessage<Tiny83>>(&s).unwrap(), m);
    }
}
