//! Ground-truth checks of a finished election.
//!
//! The harness keeps every ballot in the clear and recomputes the tally as
//! the weighted sum of the votes the agreement instances accepted, fully
//! independently of the daemon's interpolation.

use std::collections::{BTreeMap, BTreeSet};

use privocracy_core::voting::{resolve_all, DecisionMode, TallyDecision, VoterEvent};
use privocracy_core::{ElectionId, Lane, ProcessId};
use privocracy_crypto::{Canonical, Group};
use serde::Serialize;

use crate::world::{RunEnd, World};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Correct voters decided differently in one agreement instance.
    Agreement { lane: Lane, origin: u32 },
    /// A correct voter never decided every instance of the lane.
    Undecided { lane: Lane, voter: u32 },
    /// A correct voter never sent its partial tally.
    NoPartialTally { lane: Lane, voter: u32 },
    /// The daemon never decided.
    NoDecision,
    Integrity { expected: u64, got: u64, expected_weight_sum: u64, got_weight_sum: u64 },
    /// Fewer than n - 2f correct ballots counted.
    AsynchronousValidity { counted: usize, needed: usize },
    /// A correct ballot was left out after stabilization.
    SynchronousValidity { missing: Vec<u32> },
    /// A non-binary ballot was accepted.
    InvalidBallotCounted { origin: u32, value: u64 },
    /// An accepted ballot matches none the origin cast.
    Unattributable { origin: u32 },
    /// Under equal weights, the decision went against a unanimous correct side.
    AdversaryWin,
    EventLimit,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ElectionReport {
    pub election: Option<ElectionId>,
    pub decision: Option<TallyDecision>,
    pub lane: Option<Lane>,
    pub accepted: Vec<u32>,
    pub correct_accepted: usize,
    pub expected_tally: Option<u64>,
    pub expected_weight_sum: Option<u64>,
    /// Model time from issue to decision.
    pub latency_ms: Option<f64>,
    /// Plaintext votes as cast, per origin (equivocators excluded).
    pub votes: BTreeMap<u32, u64>,
    pub violations: Vec<Violation>,
}

impl ElectionReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Expectations {
    /// All correct voters cast in time on a stable network.
    pub synchronous: bool,
}

fn lane_of(mode: DecisionMode) -> Lane {
    match mode {
        DecisionMode::Normal => Lane::Normal,
        DecisionMode::EarlyApprove | DecisionMode::EarlyReject => Lane::Early,
        DecisionMode::Late => Lane::Late,
    }
}

pub fn analyze<G: Group>(
    world: &World<G>,
    election: ElectionId,
    issued_at: u64,
    end: RunEnd,
    expect: Expectations,
) -> ElectionReport {
    let n = world.n() as u32;
    let f = world.f();
    let correct: Vec<u32> = (1..=n).filter(|i| world.is_correct(*i)).collect();
    let mut r = ElectionReport { election: Some(election), ..Default::default() };
    if end == RunEnd::EventLimit {
        r.violations.push(Violation::EventLimit);
    }
    let Some(proposal) = world.daemon().proposal(election).cloned() else {
        r.violations.push(Violation::NoDecision);
        return r;
    };
    for i in 1..=n {
        if let [(v, _)] = world.ballots(i, election)[..] {
            r.votes.insert(i, v);
        }
    }

    let lanes: &[Lane] = if proposal.emergency { &[Lane::Early, Lane::Late] } else { &[Lane::Normal] };
    let mut agreed: BTreeMap<Lane, BTreeMap<u32, bool>> = BTreeMap::new();
    for &lane in lanes {
        let mut out = BTreeMap::new();
        for &i in &correct {
            let d = world.voter(i).decisions(election, lane);
            if d.len() < n as usize {
                r.violations.push(Violation::Undecided { lane, voter: i });
            }
            for (o, v) in d {
                if *out.entry(o.0).or_insert(v) != v {
                    r.violations.push(Violation::Agreement { lane, origin: o.0 });
                }
            }
        }
        agreed.insert(lane, out);
    }
    // Every correct voter reports on the lane that always completes.
    let final_lane = if proposal.emergency { Lane::Late } else { Lane::Normal };
    for &i in &correct {
        let sent = world.voter_log.iter().any(|(_, v, _, e)| {
            *v == i && matches!(e, VoterEvent::PartialTallySent { election: el, lane, .. } if *el == election && *lane == final_lane)
        });
        if !sent {
            r.violations.push(Violation::NoPartialTally { lane: final_lane, voter: i });
        }
    }

    let Some(decision) = world.daemon().decision(election).cloned() else {
        r.violations.push(Violation::NoDecision);
        return r;
    };
    let lane = lane_of(decision.mode);
    r.lane = Some(lane);
    r.latency_ms = world.decided_at(election).map(|t| (t.saturating_sub(issued_at)) as f64 / 1000.0);
    let decided = &agreed[&lane];
    r.accepted = decided.iter().filter(|(_, v)| **v).map(|(o, _)| *o).collect();
    r.correct_accepted = r.accepted.iter().filter(|o| world.is_correct(**o)).count();

    // The value each accepted origin actually shared.
    let mut values = BTreeMap::new();
    for &o in &r.accepted {
        let logged = correct.iter().find_map(|&i| {
            world.voter(i).share_log(election).into_iter().find(|e| e.origin == ProcessId(o))
        });
        let commitment = logged.and_then(|e| e.commitment.secret().map(Canonical::to_canonical));
        let value = commitment.and_then(|c| world.ballots(o, election).into_iter().find(|(_, b)| *b == c).map(|(v, _)| v));
        match value {
            Some(v) if v > 1 => r.violations.push(Violation::InvalidBallotCounted { origin: o, value: v }),
            Some(v) => {
                values.insert(o, v);
            }
            None => r.violations.push(Violation::Unattributable { origin: o }),
        }
    }
    let rejected: BTreeSet<ProcessId> = (1..=n).filter(|o| !r.accepted.contains(o)).map(ProcessId).collect();
    let weights: BTreeMap<u32, u64> = if lane == Lane::Early {
        (1..=n).map(|o| (o, proposal.weight(ProcessId(o)))).collect()
    } else {
        resolve_all(&proposal.weights, &proposal.delegation, &rejected, proposal.max_weight)
            .weights
            .into_iter()
            .map(|(p, w)| (p.0, w))
            .collect()
    };
    let tally: u64 = values.iter().map(|(o, v)| weights[o] * v).sum();
    let weight_sum: u64 = r.accepted.iter().map(|o| weights[o]).sum();
    r.expected_tally = Some(tally);
    r.expected_weight_sum = Some(weight_sum);
    if (tally, weight_sum) != (decision.tally, decision.weight_sum) {
        r.violations.push(Violation::Integrity {
            expected: tally,
            got: decision.tally,
            expected_weight_sum: weight_sum,
            got_weight_sum: decision.weight_sum,
        });
    }

    let validity_lane = if lane == Lane::Early { Lane::Late } else { lane };
    let counted = agreed[&validity_lane].iter().filter(|(o, v)| **v && world.is_correct(**o)).count();
    let needed = n as usize - 2 * f;
    if counted < needed {
        r.violations.push(Violation::AsynchronousValidity { counted, needed });
    }
    if expect.synchronous {
        let missing: Vec<u32> =
            correct.iter().copied().filter(|o| agreed[&validity_lane].get(o) != Some(&true)).collect();
        if !missing.is_empty() {
            r.violations.push(Violation::SynchronousValidity { missing });
        }
    }
    let uniform = proposal.weights.windows(2).all(|w| w[0] == w[1]);
    let unanimous = |v: u64| correct.iter().all(|i| r.votes.get(i) == Some(&v));
    let (num, den) = (proposal.threshold.numer(), proposal.threshold.denom());
    // With n = 3f + 1 at least f + 1 of the 2f + 1 counted ballots are
    // correct, so a unanimous correct side holds a strict majority of the
    // weight sum.
    let rejected_majority = unanimous(0) && decision.approved && 2 * num >= den;
    let approved_majority = unanimous(1) && !decision.approved && 2 * num <= den;
    if uniform && (rejected_majority || approved_majority) {
        r.violations.push(Violation::AdversaryWin);
    }
    r.decision = Some(decision);
    r
}
