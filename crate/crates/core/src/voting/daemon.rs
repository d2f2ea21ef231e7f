//! The daemon side of an election: issuing proposals, checking partial
//! tallies against their commitments, interpolating the tally and deciding.

use std::collections::{BTreeMap, BTreeSet};

use privocracy_crypto::{interpolate, Canonical, Group, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::ids::{ElectionId, Lane, ProcessId};
use crate::rational::Fraction;
use crate::voting::emergency::{emergency_evaluate, EmergencyOutcome};
use crate::voting::proposal::{Proposal, Purpose};
use crate::wire::{Body, Destination, Effects, Endpoint, Envelope, LoggedShare, PartialTallyMessage};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    Normal,
    EarlyApprove,
    EarlyReject,
    Late,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyDecision {
    pub election: ElectionId,
    pub approved: bool,
    pub tally: u64,
    pub weight_sum: u64,
    pub mode: DecisionMode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditResult {
    pub op: ElectionId,
    /// Reconstructed vote per origin. Values other than 0 and 1 expose
    /// voters that bypassed the binary proof.
    pub votes: BTreeMap<ProcessId, u64>,
    pub responders: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DaemonEvent {
    PartialTallyReceived { election: ElectionId, lane: Lane, from: ProcessId },
    PartialTallyRejected { election: ElectionId, lane: Lane, from: ProcessId, reason: &'static str },
    ShareReceipt { election: ElectionId, from: ProcessId, origin: ProcessId },
    EarlyUndecided { election: ElectionId, tally: u64, weight_sum: u64 },
    Decided(TallyDecision),
    AuditRequested { election: ElectionId, op: ElectionId },
    AuditCompleted { election: ElectionId, result: AuditResult },
}

pub type DaemonEffects<G> = Effects<G, DaemonEvent>;

type BucketKey = (Vec<u8>, u64);

struct LaneCollect<G: Group> {
    senders: BTreeSet<ProcessId>,
    buckets: BTreeMap<BucketKey, Vec<PartialTallyMessage<G>>>,
    resolved: bool,
}

impl<G: Group> Default for LaneCollect<G> {
    fn default() -> Self {
        LaneCollect { senders: BTreeSet::new(), buckets: BTreeMap::new(), resolved: false }
    }
}

struct AuditCollect<G: Group> {
    op: ElectionId,
    responders: BTreeSet<ProcessId>,
    /// origin -> commitment bytes -> shares
    groups: BTreeMap<ProcessId, BTreeMap<Vec<u8>, Vec<privocracy_crypto::Share<G>>>>,
    result: Option<AuditResult>,
}

struct DaemonElection<G: Group> {
    proposal: Proposal,
    lanes: BTreeMap<Lane, LaneCollect<G>>,
    decision: Option<TallyDecision>,
    evidence: Vec<PartialTallyMessage<G>>,
    receipts: BTreeMap<ProcessId, BTreeSet<ProcessId>>,
    audit: Option<AuditCollect<G>>,
}

pub struct DaemonCore<G: Group> {
    n: usize,
    f: usize,
    rng: ChaCha20Rng,
    elections: BTreeMap<ElectionId, DaemonElection<G>>,
}

impl<G: Group> DaemonCore<G> {
    pub fn new(n: usize, f: usize, seed: u64) -> Self {
        assert!(n > 3 * f, "need n >= 3f + 1");
        DaemonCore { n, f, rng: ChaCha20Rng::seed_from_u64(seed), elections: BTreeMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    /// Starts an election and returns its id with the `Propose` broadcast.
    pub fn issue(&mut self, proposal: Proposal) -> Result<(ElectionId, DaemonEffects<G>), Error> {
        proposal.validate::<G>(self.n)?;
        let id = ElectionId::random(&mut self.rng);
        self.issue_with_id(id, proposal).map(|fx| (id, fx))
    }

    /// Like [`issue`](Self::issue) with a caller-chosen id, e.g. when replaying a log.
    pub fn issue_with_id(&mut self, id: ElectionId, proposal: Proposal) -> Result<DaemonEffects<G>, Error> {
        proposal.validate::<G>(self.n)?;
        if self.elections.contains_key(&id) {
            return Err(Error::InvalidConfig(format!("election {id} already exists")));
        }
        let mut fx = Effects::default();
        fx.send(Destination::AllVoters, id, Body::Propose(Box::new(proposal.clone())));
        self.elections.insert(
            id,
            DaemonElection {
                proposal,
                lanes: BTreeMap::new(),
                decision: None,
                evidence: Vec::new(),
                receipts: BTreeMap::new(),
                audit: None,
            },
        );
        Ok(fx)
    }

    /// The proposal for an audit of `op`: every voter weighs 1 and a strict
    /// majority must approve.
    pub fn audit_proposal(&self, issuer: &str, op: ElectionId, timeout_ms: u64) -> Proposal {
        let n = self.n as u64;
        Proposal {
            issuer: issuer.to_string(),
            command: format!("audit {op}"),
            purpose: Purpose::Audit { op },
            emergency: false,
            weights: vec![1; self.n],
            threshold: Fraction::new(n / 2 + 1, n),
            delegation: Vec::new(),
            max_weight: Fraction::one(),
            timeout_ms,
        }
    }

    pub fn proposal(&self, id: ElectionId) -> Option<&Proposal> {
        self.elections.get(&id).map(|e| &e.proposal)
    }

    pub fn decision(&self, id: ElectionId) -> Option<&TallyDecision> {
        self.elections.get(&id)?.decision.as_ref()
    }

    pub fn audit_result(&self, id: ElectionId) -> Option<&AuditResult> {
        self.elections.get(&id)?.audit.as_ref()?.result.as_ref()
    }

    pub fn elections(&self) -> impl Iterator<Item = ElectionId> + '_ {
        self.elections.keys().copied()
    }

    /// Origins whose share `voter` reported logging.
    pub fn receipts(&self, id: ElectionId, voter: ProcessId) -> BTreeSet<ProcessId> {
        self.elections
            .get(&id)
            .and_then(|e| e.receipts.get(&voter).cloned())
            .unwrap_or_default()
    }

    pub fn handle(&mut self, from: Endpoint, env: Envelope<G>) -> DaemonEffects<G> {
        let mut fx = Effects::default();
        let Endpoint::Voter(voter) = from else { return fx };
        if voter.0 == 0 || voter.0 as usize > self.n {
            return fx;
        }
        let id = env.election;
        let (n, f) = (self.n, self.f);
        let Some(e) = self.elections.get_mut(&id) else { return fx };
        match env.body {
            Body::PartialTally(msg) => e.on_partial(id, voter, msg, f, &mut fx),
            Body::ShareReceipt { origin } => {
                if e.receipts.entry(voter).or_default().insert(origin) {
                    fx.events.push(DaemonEvent::ShareReceipt { election: id, from: voter, origin });
                }
            }
            Body::AuditShares { op, entries } => e.on_audit_shares(id, voter, op, entries, n, f, &mut fx),
            _ => {}
        }
        fx
    }
}

impl<G: Group> DaemonElection<G> {
    fn on_partial(
        &mut self,
        id: ElectionId,
        voter: ProcessId,
        msg: PartialTallyMessage<G>,
        f: usize,
        fx: &mut DaemonEffects<G>,
    ) {
        let lane = msg.lane;
        let lanes: &[Lane] = if self.proposal.emergency { &[Lane::Early, Lane::Late] } else { &[Lane::Normal] };
        let reject = |fx: &mut DaemonEffects<G>, reason| {
            fx.events.push(DaemonEvent::PartialTallyRejected { election: id, lane, from: voter, reason });
        };
        if !lanes.contains(&lane) {
            return reject(fx, "lane not used by this election");
        }
        let collect = self.lanes.entry(lane).or_default();
        if !collect.senders.insert(voter) {
            return reject(fx, "duplicate");
        }
        if msg.partial.index != voter.0 {
            return reject(fx, "index does not match sender");
        }
        if !msg.partial.verify(&msg.commitment) {
            return reject(fx, "share does not match commitment");
        }
        fx.events.push(DaemonEvent::PartialTallyReceived { election: id, lane, from: voter });
        fx.send(Destination::Voter(voter), id, Body::Ack { lane });
        let key = (msg.commitment.to_canonical(), msg.weight_sum);
        let bucket = collect.buckets.entry(key).or_default();
        bucket.push(msg);
        if collect.resolved || bucket.len() < f + 1 {
            return;
        }
        collect.resolved = true;
        let evidence = bucket.clone();
        let shares: Vec<_> = evidence.iter().map(|m| m.partial).collect();
        let weight_sum = evidence[0].weight_sum;
        let tally = interpolate(&shares, f + 1).ok().and_then(|(t, _)| t.to_u64()).unwrap_or(u64::MAX);
        if self.decision.is_some() {
            return;
        }
        let t = self.proposal.threshold;
        let sane = tally <= weight_sum;
        let (approved, mode) = match lane {
            Lane::Normal => (sane && t.met_by(tally, weight_sum), DecisionMode::Normal),
            Lane::Late => (sane && t.met_by(tally, weight_sum), DecisionMode::Late),
            Lane::Early => match emergency_evaluate(tally, weight_sum, self.proposal.total_weight(), t) {
                Ok(EmergencyOutcome::ApproveEarly) => (true, DecisionMode::EarlyApprove),
                Ok(EmergencyOutcome::RejectEarly) => (false, DecisionMode::EarlyReject),
                _ => {
                    fx.events.push(DaemonEvent::EarlyUndecided { election: id, tally, weight_sum });
                    return;
                }
            },
        };
        let d = TallyDecision { election: id, approved, tally, weight_sum, mode };
        self.decision = Some(d.clone());
        fx.events.push(DaemonEvent::Decided(d));
        if let (true, Purpose::Audit { op }) = (approved, &self.proposal.purpose) {
            let op = *op;
            self.audit = Some(AuditCollect { op, responders: BTreeSet::new(), groups: BTreeMap::new(), result: None });
            self.evidence = evidence.clone();
            fx.send(Destination::AllVoters, id, Body::AuditRequest { op, evidence });
            fx.events.push(DaemonEvent::AuditRequested { election: id, op });
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn on_audit_shares(
        &mut self,
        id: ElectionId,
        voter: ProcessId,
        op: ElectionId,
        entries: Vec<LoggedShare<G>>,
        n: usize,
        f: usize,
        fx: &mut DaemonEffects<G>,
    ) {
        let Some(audit) = &mut self.audit else { return };
        if audit.op != op || !audit.responders.insert(voter) {
            return;
        }
        let mut seen = BTreeSet::new();
        for entry in entries {
            if entry.share.index != voter.0 || !entry.share.verify(&entry.commitment) || !seen.insert(entry.origin) {
                continue;
            }
            audit
                .groups
                .entry(entry.origin)
                .or_default()
                .entry(entry.commitment.to_canonical())
                .or_default()
                .push(entry.share);
        }
        if audit.responders.len() < n - f {
            return;
        }
        let votes = audit
            .groups
            .iter()
            .filter_map(|(origin, groups)| {
                let shares = groups.values().find(|s| s.len() > f)?;
                let (v, _) = interpolate(shares, f + 1).ok()?;
                Some((*origin, v.to_u64().unwrap_or(u64::MAX)))
            })
            .collect();
        let result = AuditResult { op, votes, responders: audit.responders.len() };
        if audit.result.as_ref() != Some(&result) {
            audit.result = Some(result.clone());
            fx.events.push(DaemonEvent::AuditCompleted { election: id, result });
        }
    }
}
