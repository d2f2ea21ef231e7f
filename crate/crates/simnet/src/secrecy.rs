//! Exact secrecy enumeration in the q = 83 group.
//!
//! Everything the daemon and a corrupted voter observe in one election is
//! an affine function, over Z_q, of the honest votes `V` and the honest
//! dealers' random coefficients `x`: commitment matrices (through their
//! discrete logs), the corrupted voter's rows and incoming points, and
//! every partial tally. Write it `obs = o + N·V + M·x`. With `x` uniform,
//! `M·x` is uniform on the column space of `M`, so two vote vectors induce
//! the same transcript distribution iff `N·(V − V′)` lies in that space.
//! The map is read off the real dealing and combination code by probing
//! unit vectors and then re-checked on random points; the membership test
//! is a rank computation. Nothing is sampled.
//!
//! The non-interactive binary proofs are left out: each is a perfectly
//! witness-indistinguishable OR proof, so it adds no information about
//! which branch is true.

use std::collections::HashMap;

use privocracy_crypto::{
    share_linear_combine, Dealing, Group, MatrixCommitment, Polynomial, Scalar, Share, SymmetricDealing, Tiny83,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

type F = <Tiny83 as Group>::Scalar;
const Q: u64 = 83;
/// Random coefficients per honest dealer: phi_01, phi_11, psi_00, psi_01, psi_11.
const UNKNOWNS: usize = 5;

fn dlog_table() -> HashMap<Vec<u8>, u64> {
    let mut table = HashMap::new();
    let mut acc = Tiny83::identity();
    for k in 0..Q {
        table.insert(Tiny83::encode(&acc), k);
        acc = Tiny83::op(&acc, &Tiny83::g());
    }
    table
}

struct Observer {
    table: HashMap<Vec<u8>, u64>,
}

impl Observer {
    fn dlog(&self, c: &MatrixCommitment<Tiny83>, k: usize, l: usize) -> F {
        F::from_u64(self.table[&Tiny83::encode(&c.get(k, l).0)])
    }
}

/// One election under observation. `corrupted` voters' own dealings are
/// fixed and known, so they only shift `o`.
#[derive(Clone, Debug)]
struct Setting {
    n: u32,
    weights: Vec<u64>,
    accepted: Vec<u32>,
    corrupted: Vec<u32>,
}

impl Setting {
    fn honest(&self) -> Vec<u32> {
        (1..=self.n).filter(|i| !self.corrupted.contains(i)).collect()
    }

    fn dealing(&self, dealer: u32, vote: F, x: &[F]) -> SymmetricDealing<Tiny83> {
        let m = |c: F, a: F, b: F| vec![vec![c, a], vec![a, b]];
        SymmetricDealing::from_matrices(m(vote, x[0], x[1]), m(x[2], x[3], x[4])).unwrap_or_else(|| panic!("dealer {dealer}"))
    }

    fn known_dealing(&self, dealer: u32) -> SymmetricDealing<Tiny83> {
        let x: Vec<F> = (0..UNKNOWNS as u64).map(|k| F::from_u64(7 * dealer as u64 + 3 * k + 1)).collect();
        self.dealing(dealer, F::from_u64(1), &x)
    }

    /// The full observable transcript for honest votes `votes` and honest
    /// randomness `x` (UNKNOWNS entries per honest dealer, in id order).
    fn observe(&self, obs: &Observer, votes: &[F], x: &[F]) -> Vec<F> {
        let honest = self.honest();
        let mut dealings = HashMap::new();
        for i in 1..=self.n {
            let d = match honest.iter().position(|h| *h == i) {
                Some(k) => self.dealing(i, votes[k], &x[k * UNKNOWNS..(k + 1) * UNKNOWNS]),
                None => self.known_dealing(i),
            };
            dealings.insert(i, d);
        }
        let mut out = Vec::new();
        for i in 1..=self.n {
            let c = dealings[&i].commitment();
            for k in 0..c.size() {
                for l in 0..c.size() {
                    out.push(obs.dlog(&c, k, l));
                }
            }
        }
        for &c in &self.corrupted {
            for i in 1..=self.n {
                let row = dealings[&i].row(c);
                out.extend(row.vote.coeffs.iter().chain(&row.blinding.coeffs));
                for j in 1..=self.n {
                    let (p, b) = dealings[&j].row(c).point(i);
                    out.extend([p, b]);
                }
            }
        }
        for j in 1..=self.n {
            let terms: Vec<(Share<Tiny83>, u64)> = self
                .accepted
                .iter()
                .map(|i| (dealings[i].row(j).share(j), self.weights[*i as usize - 1]))
                .collect();
            let p = share_linear_combine(&terms).expect("common index");
            out.extend([p.value, p.blinding]);
        }
        out
    }
}

/// Rank of a matrix given as columns, over Z_83.
fn rank(columns: &[Vec<F>]) -> usize {
    let Some(rows) = columns.first().map(Vec::len) else { return 0 };
    let mut m: Vec<Vec<F>> = (0..rows).map(|r| columns.iter().map(|c| c[r]).collect()).collect();
    let cols = columns.len();
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|r| !m[*r][col].is_zero()) else { continue };
        m.swap(rank, p);
        let inv = m[rank][col].invert().expect("nonzero");
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let k = m[r][col] * inv;
                for c in col..cols {
                    let v = m[rank][c];
                    m[r][c] = m[r][c] - k * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

struct LinearView {
    n_cols: Vec<Vec<F>>,
    m_cols: Vec<Vec<F>>,
    m_rank: usize,
}

fn sub(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

fn extract(s: &Setting, obs: &Observer, rng: &mut ChaCha20Rng) -> Result<LinearView, String> {
    let h = s.honest().len();
    let zv = vec![F::zero(); h];
    let zx = vec![F::zero(); h * UNKNOWNS];
    let base = s.observe(obs, &zv, &zx);
    let unit = |len: usize, k: usize| (0..len).map(|i| if i == k { F::one() } else { F::zero() }).collect::<Vec<F>>();
    let n_cols: Vec<Vec<F>> = (0..h).map(|k| sub(&s.observe(obs, &unit(h, k), &zx), &base)).collect();
    let m_cols: Vec<Vec<F>> = (0..zx.len()).map(|k| sub(&s.observe(obs, &zv, &unit(zx.len(), k)), &base)).collect();
    for _ in 0..8 {
        let v: Vec<F> = (0..h).map(|_| F::random(rng)).collect();
        let x: Vec<F> = (0..zx.len()).map(|_| F::random(rng)).collect();
        let mut expect = base.clone();
        for (col, k) in n_cols.iter().zip(&v).chain(m_cols.iter().zip(&x)) {
            for (e, c) in expect.iter_mut().zip(col) {
                *e = *e + *k * *c;
            }
        }
        if s.observe(obs, &v, &x) != expect {
            return Err(format!("transcript is not affine for {s:?}"));
        }
    }
    let m_rank = rank(&m_cols);
    Ok(LinearView { n_cols, m_cols, m_rank })
}

impl LinearView {
    fn indistinguishable(&self, v: &[u64], w: &[u64]) -> bool {
        let rows = self.m_cols[0].len();
        let mut d = vec![F::zero(); rows];
        for ((col, a), b) in self.n_cols.iter().zip(v).zip(w) {
            let k = F::from_u64(*a) - F::from_u64(*b);
            for (e, c) in d.iter_mut().zip(col) {
                *e = *e + k * *c;
            }
        }
        let mut cols = self.m_cols.clone();
        cols.push(d);
        rank(&cols) == self.m_rank
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SecrecyReport {
    pub settings: usize,
    /// Pairs with equal tally that were checked for indistinguishability.
    pub equal_tally_pairs: usize,
    pub leaks: Vec<String>,
    /// Pairs with different tallies; all must be distinguishable.
    pub unequal_tally_pairs: usize,
    pub unequal_tally_hidden: usize,
    /// Over-threshold coalitions (two corrupted voters) that did leak.
    pub control_leaks_detected: usize,
    pub control_settings: usize,
}

impl SecrecyReport {
    pub fn ok(&self) -> bool {
        self.equal_tally_pairs > 0
            && self.leaks.is_empty()
            && self.unequal_tally_hidden == 0
            && self.control_settings > 0
            && self.control_leaks_detected == self.control_settings
    }
}

pub const WEIGHT_VECTORS: [[u64; 4]; 4] = [[1, 1, 1, 1], [1, 2, 3, 4], [5, 1, 1, 1], [2, 2, 1, 1]];

fn subsets(n: u32) -> impl Iterator<Item = Vec<u32>> {
    (0u32..1 << n).map(move |m| (1..=n).filter(|i| m >> (i - 1) & 1 == 1).collect())
}

fn vote_vectors(h: usize) -> Vec<Vec<u64>> {
    (0u32..1 << h).map(|m| (0..h).map(|k| u64::from(m >> k & 1)).collect()).collect()
}

fn check(s: &Setting, view: &LinearView, report: &mut SecrecyReport) -> bool {
    let honest = s.honest();
    let tally = |v: &[u64]| -> u64 {
        honest.iter().zip(v).filter(|(i, _)| s.accepted.contains(i)).map(|(i, x)| s.weights[*i as usize - 1] * x).sum()
    };
    let mut leaked = false;
    let vs = vote_vectors(honest.len());
    for (a, v) in vs.iter().enumerate() {
        for w in &vs[a + 1..] {
            let same = view.indistinguishable(v, w);
            if tally(v) == tally(w) {
                report.equal_tally_pairs += 1;
                if !same {
                    leaked = true;
                    report.leaks.push(format!("{s:?}: {v:?} vs {w:?}"));
                }
            } else {
                report.unequal_tally_pairs += 1;
                if same {
                    report.unequal_tally_hidden += 1;
                }
            }
        }
    }
    leaked
}

/// Exhaustive check for n = 4, f = 1: every corrupted voter, every
/// acceptance set of size ≥ n − f with at least two honest members, and
/// each weight vector in [`WEIGHT_VECTORS`]. A control run with two
/// corrupted voters must leak.
pub fn enumerate_secrecy(seed: u64) -> SecrecyReport {
    let n = 4u32;
    let obs = Observer { table: dlog_table() };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut report = SecrecyReport::default();
    for weights in WEIGHT_VECTORS {
        for accepted in subsets(n).filter(|a| a.len() >= 3) {
            for c in 1..=n {
                let s = Setting { n, weights: weights.to_vec(), accepted: accepted.clone(), corrupted: vec![c] };
                if accepted.iter().filter(|i| **i != c).count() < 2 {
                    continue;
                }
                let view = match extract(&s, &obs, &mut rng) {
                    Ok(v) => v,
                    Err(e) => {
                        report.leaks.push(e);
                        continue;
                    }
                };
                report.settings += 1;
                check(&s, &view, &mut report);
            }
            // Over-threshold control: the two corrupted rows pin every
            // honest secret.
            let corrupted = vec![1, 2];
            let s = Setting { n, weights: weights.to_vec(), accepted: accepted.clone(), corrupted };
            if accepted.iter().filter(|i| **i > 2).count() == 2 {
                if let Ok(view) = extract(&s, &obs, &mut rng) {
                    let mut scratch = SecrecyReport::default();
                    let leaked = check(&s, &view, &mut scratch);
                    // Only settings where the tally leaves something to hide.
                    if scratch.equal_tally_pairs > 0 {
                        report.control_settings += 1;
                        report.control_leaks_detected += usize::from(leaked);
                    }
                }
            }
        }
    }
    report
}

/// For a threshold-`k` Shamir sharing over Z_83 (degree k − 1), any k − 1
/// shares are matched by exactly as many polynomials with secret 0 as with
/// secret 1. Returns the per-secret counts for every (index set, share
/// tuple) that failed, which is empty when the property holds.
pub fn shamir_uniformity(k: usize, n: u32) -> Vec<(Vec<u32>, Vec<u64>, u64, u64)> {
    assert!((1..=3).contains(&k));
    let mut bad = Vec::new();
    for idx in subsets(n).filter(|s| s.len() == k - 1) {
        let mut counts: [HashMap<Vec<u64>, u64>; 2] = [HashMap::new(), HashMap::new()];
        for secret in 0..2u64 {
            for m in 0..Q.pow(k as u32 - 1) {
                let mut coeffs = vec![F::from_u64(secret)];
                let mut rest = m;
                for _ in 1..k {
                    coeffs.push(F::from_u64(rest % Q));
                    rest /= Q;
                }
                let d = Dealing::<Tiny83> { vote: Polynomial::new(coeffs), blinding: Polynomial::new(vec![F::zero(); k]) };
                let tuple: Vec<u64> = idx.iter().map(|i| d.share(*i).value.to_u64().expect("small")).collect();
                *counts[secret as usize].entry(tuple).or_default() += 1;
            }
        }
        // q^(k-1) polynomials per secret onto q^(k-1) tuples: a bijection.
        let expected = 1;
        let keys: std::collections::BTreeSet<&Vec<u64>> = counts[0].keys().chain(counts[1].keys()).collect();
        let all = Q.pow(k as u32 - 1) as usize;
        if keys.len() != all {
            bad.push((idx.clone(), Vec::new(), keys.len() as u64, all as u64));
        }
        for t in keys {
            let (a, b) = (counts[0].get(t).copied().unwrap_or(0), counts[1].get(t).copied().unwrap_or(0));
            if a != b || a != expected {
                bad.push((idx.clone(), t.clone(), a, b));
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_over_z83() {
        let c = |v: &[u64]| v.iter().map(|x| F::from_u64(*x)).collect::<Vec<F>>();
        assert_eq!(rank(&[c(&[1, 2]), c(&[2, 4])]), 1);
        assert_eq!(rank(&[c(&[1, 2]), c(&[2, 5])]), 2);
        assert_eq!(rank(&[c(&[0, 0])]), 0);
    }

    #[test]
    fn dlog_table_is_complete() {
        assert_eq!(dlog_table().len(), Q as usize);
    }

    #[test]
    fn shamir_threshold_two_is_uniform() {
        assert!(shamir_uniformity(2, 4).is_empty());
    }
}
