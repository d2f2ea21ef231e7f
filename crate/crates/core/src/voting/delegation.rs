//! Trust-graph delegation for voters whose ballots were not accepted.
//!
//! Each rejected voter's weight moves to the first admissible delegate
//! reachable through its outgoing trust edges. Edges are tried by
//! descending trust, ties by ascending id. A delegate that was itself
//! rejected is passed through transitively; an accepted delegate is
//! admissible only if the transfer keeps its effective weight within
//! `max_weight * total`. Resolution is deterministic, so every voter
//! derives the same effective weights from the same agreement outcome.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::ProcessId;
use crate::rational::Fraction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelegationEdge {
    pub from: ProcessId,
    pub to: ProcessId,
    pub trust: u64,
}

fn ordered_out(edges: &[DelegationEdge], from: ProcessId) -> Vec<ProcessId> {
    let mut out: Vec<_> = edges.iter().filter(|e| e.from == from).collect();
    out.sort_by(|a, b| b.trust.cmp(&a.trust).then(a.to.cmp(&b.to)));
    out.into_iter().map(|e| e.to).collect()
}

/// Finds the delegate for `voter`, given current effective weights.
pub fn delegate_resolve(
    edges: &[DelegationEdge],
    voter: ProcessId,
    weight: u64,
    timed_out: &BTreeSet<ProcessId>,
    effective: &BTreeMap<ProcessId, u64>,
    cap: Fraction,
    total: u64,
) -> Option<ProcessId> {
    let mut visited = BTreeSet::from([voter]);
    let mut stack: Vec<ProcessId> = ordered_out(edges, voter).into_iter().rev().collect();
    while let Some(d) = stack.pop() {
        if !visited.insert(d) {
            continue;
        }
        if timed_out.contains(&d) {
            stack.extend(ordered_out(edges, d).into_iter().rev());
            continue;
        }
        let current = effective.get(&d).copied().unwrap_or(0);
        if cap.admits(current + weight, total) {
            return Some(d);
        }
    }
    None
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Resolution {
    /// Effective weight per voter; rejected voters have weight 0.
    pub weights: BTreeMap<ProcessId, u64>,
    pub assignments: BTreeMap<ProcessId, ProcessId>,
}

/// Resolves every rejected voter in ascending id order.
pub fn resolve_all(
    weights: &[u64],
    edges: &[DelegationEdge],
    rejected: &BTreeSet<ProcessId>,
    cap: Fraction,
) -> Resolution {
    let total: u64 = weights.iter().sum();
    let mut eff: BTreeMap<ProcessId, u64> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| (ProcessId(i as u32 + 1), if rejected.contains(&ProcessId(i as u32 + 1)) { 0 } else { *w }))
        .collect();
    let mut assignments = BTreeMap::new();
    for r in rejected {
        let w = weights[r.0 as usize - 1];
        if w == 0 {
            continue;
        }
        if let Some(d) = delegate_resolve(edges, *r, w, rejected, &eff, cap, total) {
            *eff.get_mut(&d).unwrap() += w;
            assignments.insert(*r, d);
        }
    }
    Resolution { weights: eff, assignments }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(from: u32, to: u32, trust: u64) -> DelegationEdge {
        DelegationEdge { from: ProcessId(from), to: ProcessId(to), trust }
    }

    fn set(ids: &[u32]) -> BTreeSet<ProcessId> {
        ids.iter().map(|i| ProcessId(*i)).collect()
    }

    #[test]
    fn direct_delegate() {
        let r = resolve_all(&[1, 1, 1, 1], &[e(1, 2, 5)], &set(&[1]), Fraction::new(1, 2));
        assert_eq!(r.assignments.get(&ProcessId(1)), Some(&ProcessId(2)));
        assert_eq!(r.weights[&ProcessId(2)], 2);
        assert_eq!(r.weights[&ProcessId(1)], 0);
    }

    #[test]
    fn chains_through_timed_out_delegates() {
        let edges = [e(1, 2, 5), e(2, 3, 1)];
        let r = resolve_all(&[1, 1, 1, 1], &edges, &set(&[1, 2]), Fraction::one());
        assert_eq!(r.assignments[&ProcessId(1)], ProcessId(3));
        assert_eq!(r.assignments[&ProcessId(2)], ProcessId(3));
        assert_eq!(r.weights[&ProcessId(3)], 3);
    }

    #[test]
    fn prefers_trust_then_lower_id_and_respects_cap() {
        let edges = [e(1, 3, 2), e(1, 2, 2), e(1, 4, 9)];
        let r = resolve_all(&[1, 1, 1, 1], &edges, &set(&[1]), Fraction::one());
        assert_eq!(r.assignments[&ProcessId(1)], ProcessId(4));

        // Voter 4 would reach 3 of 5 against a cap of 2 of 5; 2 and 3 tie on
        // trust and 2 has the lower id.
        let r = resolve_all(&[1, 1, 1, 2], &edges, &set(&[1]), Fraction::new(2, 5));
        assert_eq!(r.assignments[&ProcessId(1)], ProcessId(2));
    }

    #[test]
    fn no_admissible_delegate() {
        let r = resolve_all(&[1, 1, 1, 1], &[e(1, 2, 1)], &set(&[1]), Fraction::new(1, 4));
        assert!(r.assignments.is_empty());
        let r = resolve_all(&[1, 1, 1, 1], &[e(1, 2, 1), e(2, 1, 1)], &set(&[1, 2]), Fraction::one());
        assert!(r.assignments.is_empty());
    }
}
