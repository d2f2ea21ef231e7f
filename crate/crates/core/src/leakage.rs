//! Worst-case vote disclosure to an observer that sees every interpolated
//! tally, as happens when the daemon runs outside a trusted enclave.
//!
//! An observation of round `r` is a tally `T_r = sum_{i in S} w_i v_i` for
//! some unknown set `S` of accepted voters with `n - f <= |S| <= n`. The
//! analyzer intersects, round by round, the sets of vote vectors that could
//! have produced each tally, and measures leakage as set shrinkage in bits
//! under a uniform prior over `{0,1}^n`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub const MAX_VOTERS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationRound {
    pub tally: u64,
    /// `weights[i]` belongs to voter `i + 1`.
    pub weights: Vec<u64>,
    /// Weight of the accepted set, if the observer sees it.
    #[serde(default)]
    pub weight_sum: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymityClass {
    pub weight: u64,
    pub members: Vec<u32>,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub n: usize,
    pub f: usize,
    /// `log2 |T_r|`: the most a single round's tally can reveal.
    pub per_round_bits: Vec<f64>,
    /// `n - log2 |C_r|` after each round, `C_r` the compatible set.
    pub cumulative_bits: Vec<f64>,
    pub compatible: Vec<usize>,
    /// The last round did not shrink the compatible set.
    pub saturated: bool,
    /// Number of rounds that strictly shrank the compatible set.
    pub r_max: Option<usize>,
    pub anonymity_classes: Vec<AnonymityClass>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LeakageError {
    #[error("{0} voters is beyond exhaustive enumeration (max {MAX_VOTERS}); use a sampling analysis")]
    TooManyVoters(usize),
    #[error("need n >= 1 and f < n, got n = {n}, f = {f}")]
    BadParameters { n: usize, f: usize },
    #[error("round {round} has {got} weights, expected {n}")]
    WeightCount { round: usize, got: usize, n: usize },
}

/// A vote vector as a bitmask: bit `i` is voter `i + 1`'s vote.
pub type VoteVector = u32;

fn subset_sums(weights: &[u64]) -> Vec<u64> {
    let mut sums = vec![0u64; 1 << weights.len()];
    for mask in 1..sums.len() {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] + weights[low];
    }
    sums
}

fn allowed_subsets(n: usize, f: usize) -> Vec<u32> {
    (0u32..1 << n).filter(|s| s.count_ones() as usize >= n - f).collect()
}

fn check(rounds: &[ObservationRound], n: usize, f: usize) -> Result<(), LeakageError> {
    if n > MAX_VOTERS {
        return Err(LeakageError::TooManyVoters(n));
    }
    if n == 0 || f >= n {
        return Err(LeakageError::BadParameters { n, f });
    }
    for (i, r) in rounds.iter().enumerate() {
        if r.weights.len() != n {
            return Err(LeakageError::WeightCount { round: i + 1, got: r.weights.len(), n });
        }
    }
    Ok(())
}

/// Vectors in `candidates` consistent with one round.
fn filter_round(candidates: &[VoteVector], round: &ObservationRound, subsets: &[u32]) -> Vec<VoteVector> {
    let sums = subset_sums(&round.weights);
    let subsets: Vec<u32> = subsets
        .iter()
        .copied()
        .filter(|s| round.weight_sum.map_or(true, |w| sums[*s as usize] == w))
        .collect();
    candidates
        .iter()
        .copied()
        .filter(|v| subsets.iter().any(|s| sums[(s & v) as usize] == round.tally))
        .collect()
}

/// Every vote vector that explains all `rounds`.
pub fn enumerate_compatible(
    rounds: &[ObservationRound],
    n: usize,
    f: usize,
) -> Result<BTreeSet<VoteVector>, LeakageError> {
    check(rounds, n, f)?;
    let subsets = allowed_subsets(n, f);
    let mut set: Vec<VoteVector> = (0..1u32 << n).collect();
    for r in rounds {
        set = filter_round(&set, r, &subsets);
    }
    Ok(set.into_iter().collect())
}

/// Tallies any vote vector can produce under `weights` with `f` omissions.
pub fn achievable_tallies(weights: &[u64], f: usize, weight_sum: Option<u64>) -> BTreeSet<u64> {
    let n = weights.len();
    let sums = subset_sums(weights);
    let mut out = BTreeSet::new();
    for s in allowed_subsets(n, f) {
        if weight_sum.is_some_and(|w| sums[s as usize] != w) {
            continue;
        }
        // Sub-masks of s.
        let mut u = s;
        loop {
            out.insert(sums[u as usize]);
            if u == 0 {
                break;
            }
            u = (u - 1) & s;
        }
    }
    out
}

pub fn leakage_bound(rounds: &[ObservationRound], n: usize, f: usize) -> Result<LeakageReport, LeakageError> {
    check(rounds, n, f)?;
    let subsets = allowed_subsets(n, f);
    let mut set: Vec<VoteVector> = (0..1u32 << n).collect();
    let mut report = LeakageReport {
        n,
        f,
        per_round_bits: Vec::new(),
        cumulative_bits: Vec::new(),
        compatible: Vec::new(),
        saturated: false,
        r_max: None,
        anonymity_classes: rounds.first().map(|r| anonymity_classify(&r.weights)).unwrap_or_default(),
    };
    let mut shrinks = 0;
    for r in rounds {
        let before = set.len();
        set = filter_round(&set, r, &subsets);
        if set.len() < before {
            shrinks += 1;
        }
        report.saturated = set.len() == before;
        let tallies = achievable_tallies(&r.weights, f, r.weight_sum).len().max(1);
        report.per_round_bits.push((tallies as f64).log2());
        report.cumulative_bits.push(n as f64 - (set.len().max(1) as f64).log2());
        report.compatible.push(set.len());
    }
    if !rounds.is_empty() {
        report.r_max = Some(shrinks);
    }
    Ok(report)
}

/// Groups voters (1-based) by equal weight.
pub fn anonymity_classify(weights: &[u64]) -> Vec<AnonymityClass> {
    let mut by_weight: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
    for (i, w) in weights.iter().enumerate() {
        by_weight.entry(*w).or_default().push(i as u32 + 1);
    }
    let mut classes: Vec<_> = by_weight
        .into_iter()
        .map(|(weight, members)| AnonymityClass { weight, k: members.len(), members })
        .collect();
    classes.sort_by_key(|c| c.members[0]);
    classes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round(tally: u64, weights: &[u64]) -> ObservationRound {
        ObservationRound { tally, weights: weights.to_vec(), weight_sum: None }
    }

    #[test]
    fn no_rounds_leaves_everything() {
        assert_eq!(enumerate_compatible(&[], 4, 1).unwrap().len(), 16);
    }

    #[test]
    fn unanimous_uniform_tally_pins_all_ones() {
        let c = enumerate_compatible(&[round(4, &[1, 1, 1, 1])], 4, 0).unwrap();
        assert_eq!(c.into_iter().collect::<Vec<_>>(), vec![0b1111]);
    }

    #[test]
    fn four_two_one_five() {
        let c = enumerate_compatible(&[round(5, &[4, 2, 1])], 3, 0).unwrap();
        // Voters 1 and 3 yes.
        assert_eq!(c.into_iter().collect::<Vec<_>>(), vec![0b101]);
    }

    #[test]
    fn classes() {
        let c = anonymity_classify(&[5, 5, 3]);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].members.clone(), c[0].k), (vec![1, 2], 2));
        assert_eq!((c[1].members.clone(), c[1].k), (vec![3], 1));
        assert_eq!(anonymity_classify(&[2; 6])[0].k, 6);
        assert_eq!(anonymity_classify(&[1, 2, 3]).len(), 3);
    }

    #[test]
    fn errors() {
        assert_eq!(enumerate_compatible(&[], 21, 0), Err(LeakageError::TooManyVoters(21)));
        assert!(matches!(enumerate_compatible(&[round(0, &[1])], 2, 0), Err(LeakageError::WeightCount { .. })));
    }

    #[test]
    fn weight_sum_observation_narrows() {
        // With f = 1, tally 1 under unit weights is ambiguous; knowing the
        // accepted weight is 3 rules out vectors with two yes among any three.
        let w = [1, 1, 1, 1];
        let hidden = enumerate_compatible(&[round(1, &w)], 4, 1).unwrap();
        let seen = enumerate_compatible(
            &[ObservationRound { tally: 1, weights: w.to_vec(), weight_sum: Some(4) }],
            4,
            1,
        )
        .unwrap();
        assert!(seen.is_subset(&hidden));
        assert_eq!(seen.len(), 4);
        assert!(hidden.len() > seen.len());
    }

    #[test]
    fn report_shapes() {
        let w = [1, 2, 4];
        let r = leakage_bound(&[round(5, &w), round(5, &w)], 3, 0).unwrap();
        assert_eq!(r.compatible, vec![1, 1]);
        assert_eq!(r.cumulative_bits, vec![3.0, 3.0]);
        assert_eq!(r.per_round_bits[0], 3.0);
        assert!(r.saturated);
        assert_eq!(r.r_max, Some(1));
    }
}
