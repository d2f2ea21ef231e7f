//! The voter state machine.
//!
//! Per election a voter:
//!
//! 1. on `Propose`, obtains a vote from its [`VoteSource`], shares
//!    `(vote, blinding)` through AVSS and reliably broadcasts an IsBinary
//!    proof for the commitment to it;
//! 2. for every origin whose share *and* valid proof it holds while its
//!    window is open, proposes `true` in that origin's binary agreement;
//! 3. closes the window once `n - f` agreements decided `true` and the
//!    vote timer expired, proposing `false` everywhere it has not proposed;
//! 4. once all `n` agreements decided and it holds the share of every
//!    accepted origin, sends the daemon a weighted partial tally.
//!
//! Emergency elections run two agreement lanes. `Early` closes as soon as
//! accepted weight reaches the frontier `t_e` (or `n - f` origins are in);
//! `Late` closes at `n - f` acceptances and treats an early acceptance as
//! final, only running its own agreement for origins the early lane
//! rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use privocracy_crypto::{
    commit, commit_weighted_combine, interpolate, share_linear_combine, BinaryProof, Canonical,
    Group, Scalar,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::aba::{Aba, AbaStep};
use crate::avss::{Avss, AvssOutput, AvssStep};
use crate::brb::{Brb, BrbStep};
use crate::coin::CommonCoin;
use crate::ids::{ElectionId, InstanceTag, Lane, Membership, PrimitiveKind, ProcessId};
use crate::step::Target;
use crate::voting::delegation::resolve_all;
use crate::voting::proposal::{Proposal, Purpose};
use crate::voting::source::{VoteIntent, VoteSource};
use crate::voting::store::{MemoryShareStore, ShareStore};
use crate::wire::{Body, Destination, Effects, Endpoint, Envelope, LoggedShare, PartialTallyMessage, TimerKey};
use crate::Error;

/// Observable milestones, for logs, metrics and tests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VoterEvent {
    /// `commitment` is the canonical encoding of the ballot's Pedersen
    /// commitment, the constant term of the dealer's vector commitment.
    BallotCast { election: ElectionId, vote: u64, commitment: Vec<u8> },
    ShareLogged { election: ElectionId, origin: ProcessId },
    ProofRejected { election: ElectionId, origin: ProcessId },
    AbaDecided { election: ElectionId, lane: Lane, origin: ProcessId, value: bool },
    WindowClosed { election: ElectionId, lane: Lane },
    PartialTallySent {
        election: ElectionId,
        lane: Lane,
        weight_sum: u64,
        effective_weights: BTreeMap<ProcessId, u64>,
    },
    /// The early lane accepted too little weight to be evaluated.
    EarlyTallySkipped { election: ElectionId },
    AuditDisclosed { election: ElectionId, op: ElectionId, entries: usize },
    AuditRefused { election: ElectionId, op: ElectionId },
}

pub type VoterEffects<G> = Effects<G, VoterEvent>;

#[derive(Debug, Default)]
struct LaneState {
    abas: BTreeMap<ProcessId, Aba>,
    proposed: BTreeSet<ProcessId>,
    decided: BTreeMap<ProcessId, bool>,
    accepting: bool,
    tally_done: bool,
}

impl LaneState {
    fn trues(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.decided.iter().filter(|(_, v)| **v).map(|(p, _)| *p)
    }
}

struct Election<G: Group> {
    id: ElectionId,
    proposal: Option<Proposal>,
    voted: bool,
    window_expired: bool,
    avss: BTreeMap<ProcessId, Avss<G>>,
    proofs: BTreeMap<ProcessId, Brb>,
    shares: BTreeMap<ProcessId, AvssOutput<G>>,
    proof_of: BTreeMap<ProcessId, Option<BinaryProof<G>>>,
    checked: BTreeSet<ProcessId>,
    valid: BTreeSet<ProcessId>,
    lanes: BTreeMap<Lane, LaneState>,
    tallies: BTreeMap<Lane, PartialTallyMessage<G>>,
    pending_audit: Option<(ElectionId, Vec<PartialTallyMessage<G>>)>,
    audit_answered: bool,
}

struct Ctx<'a, G: Group> {
    m: Membership,
    coin: &'a Arc<dyn CommonCoin>,
    rng: &'a mut ChaCha20Rng,
    store: &'a mut dyn ShareStore<G>,
    fx: VoterEffects<G>,
}

fn dest(t: Target) -> Destination {
    match t {
        Target::All => Destination::AllVoters,
        Target::Node(p) => Destination::Voter(p),
    }
}

pub struct VoterNode<G: Group> {
    m: Membership,
    coin: Arc<dyn CommonCoin>,
    rng: ChaCha20Rng,
    source: Box<dyn VoteSource>,
    store: Box<dyn ShareStore<G>>,
    elections: BTreeMap<ElectionId, Election<G>>,
}

impl<G: Group> VoterNode<G> {
    pub fn new(m: Membership, coin: Arc<dyn CommonCoin>, seed: u64, source: Box<dyn VoteSource>) -> Self {
        Self::with_store(m, coin, seed, source, Box::new(MemoryShareStore::new()))
    }

    pub fn with_store(
        m: Membership,
        coin: Arc<dyn CommonCoin>,
        seed: u64,
        source: Box<dyn VoteSource>,
        store: Box<dyn ShareStore<G>>,
    ) -> Self {
        VoterNode {
            m,
            coin,
            rng: ChaCha20Rng::seed_from_u64(seed ^ ((m.me.0 as u64) << 48)),
            source,
            store,
            elections: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> ProcessId {
        self.m.me
    }

    pub fn membership(&self) -> Membership {
        self.m
    }

    /// Elections proposed to this voter that it has not voted in yet.
    pub fn pending(&self) -> Vec<(ElectionId, &Proposal)> {
        self.elections
            .values()
            .filter(|e| !e.voted && !e.lanes.values().all(|l| l.tally_done))
            .filter_map(|e| e.proposal.as_ref().map(|p| (e.id, p)))
            .collect()
    }

    pub fn has_voted(&self, election: ElectionId) -> bool {
        self.elections.get(&election).is_some_and(|e| e.voted)
    }

    pub fn proposal(&self, election: ElectionId) -> Option<&Proposal> {
        self.elections.get(&election)?.proposal.as_ref()
    }

    pub fn decisions(&self, election: ElectionId, lane: Lane) -> BTreeMap<ProcessId, bool> {
        self.elections
            .get(&election)
            .and_then(|e| e.lanes.get(&lane))
            .map(|l| l.decided.clone())
            .unwrap_or_default()
    }

    pub fn partial_tally(&self, election: ElectionId, lane: Lane) -> Option<&PartialTallyMessage<G>> {
        self.elections.get(&election)?.tallies.get(&lane)
    }

    pub fn share_log(&self, election: ElectionId) -> Vec<LoggedShare<G>> {
        self.store.entries(election)
    }

    fn split(&mut self, election: ElectionId) -> (&mut Election<G>, Ctx<'_, G>) {
        let e = self.elections.entry(election).or_insert_with(|| Election::new(election));
        let ctx = Ctx {
            m: self.m,
            coin: &self.coin,
            rng: &mut self.rng,
            store: self.store.as_mut(),
            fx: Effects::default(),
        };
        (e, ctx)
    }

    pub fn handle_message(&mut self, from: Endpoint, env: Envelope<G>) -> VoterEffects<G> {
        let election = env.election;
        if let (Endpoint::Daemon, Body::Propose(p)) = (from, &env.body) {
            if p.validate::<G>(self.m.n).is_err() {
                return Effects::default();
            }
            // A repeated Propose comes from a daemon that restarted and lost
            // its in-memory tallies: answer with whatever we already sent.
            if let Some(e) = self.elections.get(&election).filter(|e| e.proposal.is_some()) {
                let mut fx = Effects::default();
                for msg in e.tallies.values() {
                    fx.send(Destination::Daemon, election, Body::PartialTally(msg.clone()));
                }
                return fx;
            }
            let intent = self.source.on_propose(election, p);
            let (e, mut ctx) = self.split(election);
            e.on_propose((**p).clone(), &mut ctx);
            match intent {
                VoteIntent::Cast(v) => {
                    let _ = e.cast(G::Scalar::from_u64(v as u64), true, &mut ctx);
                }
                VoteIntent::After(d, v) => ctx.fx.timers.push((TimerKey::CastVote(election, v), d)),
                VoteIntent::Defer => {}
            }
            return ctx.fx;
        }
        let (e, mut ctx) = self.split(election);
        match (from, env.body) {
            (Endpoint::Daemon, Body::AuditRequest { op, evidence }) => e.on_audit_request(op, evidence, &mut ctx),
            (Endpoint::Voter(p), Body::Proof { originator, msg }) => {
                let m = ctx.m;
                let step = e.proofs.entry(originator).or_insert_with(|| Brb::new(m, originator)).handle(p, msg);
                e.on_brb_step(originator, step, &mut ctx);
            }
            (Endpoint::Voter(p), Body::Avss { dealer, msg }) => {
                let m = ctx.m;
                let step = e.avss.entry(dealer).or_insert_with(|| Avss::new(m, dealer)).handle(p, msg);
                e.on_avss_step(dealer, step, &mut ctx);
            }
            (Endpoint::Voter(p), Body::Aba { lane, originator, msg }) => {
                let step = e.aba(lane, originator, &ctx).handle(p, msg);
                e.on_aba_step(lane, originator, step, &mut ctx);
            }
            _ => {}
        }
        ctx.fx
    }

    pub fn handle_timer(&mut self, key: TimerKey) -> VoterEffects<G> {
        match key {
            TimerKey::VoteWindow(election) => {
                let (e, mut ctx) = self.split(election);
                e.window_expired = true;
                e.check_close(Lane::Normal, &mut ctx);
                ctx.fx
            }
            TimerKey::CastVote(election, v) => self.submit_vote(election, v).unwrap_or_default(),
        }
    }

    /// Casts this voter's ballot. Errors if there is no proposal yet or the
    /// voter already voted.
    pub fn submit_vote(&mut self, election: ElectionId, vote: bool) -> Result<VoterEffects<G>, Error> {
        self.cast(election, G::Scalar::from_u64(vote as u64), true)
    }

    /// Casts an arbitrary value with the IsBinary guard bypassed. Only
    /// meaningful for fault injection.
    pub fn cast_unchecked(&mut self, election: ElectionId, value: u64) -> Result<VoterEffects<G>, Error> {
        self.cast(election, G::Scalar::from_u64(value), false)
    }

    fn cast(&mut self, election: ElectionId, vote: G::Scalar, checked: bool) -> Result<VoterEffects<G>, Error> {
        let e = self.elections.get(&election).ok_or(Error::UnknownElection(election))?;
        if e.proposal.is_none() {
            return Err(Error::UnknownElection(election));
        }
        let (e, mut ctx) = self.split(election);
        e.cast(vote, checked, &mut ctx)?;
        Ok(ctx.fx)
    }

    /// Approximate bytes of protocol state held by this voter.
    pub fn footprint(&self) -> usize {
        self.store.footprint() + self.elections.values().map(Election::footprint).sum::<usize>()
    }
}

impl<G: Group> Election<G> {
    fn new(id: ElectionId) -> Self {
        Election {
            id,
            proposal: None,
            voted: false,
            window_expired: false,
            avss: BTreeMap::new(),
            proofs: BTreeMap::new(),
            shares: BTreeMap::new(),
            proof_of: BTreeMap::new(),
            checked: BTreeSet::new(),
            valid: BTreeSet::new(),
            lanes: BTreeMap::new(),
            tallies: BTreeMap::new(),
            pending_audit: None,
            audit_answered: false,
        }
    }

    fn lane_set(&self) -> &'static [Lane] {
        match &self.proposal {
            Some(p) if p.emergency => &[Lane::Early, Lane::Late],
            Some(_) => &[Lane::Normal],
            None => &[],
        }
    }

    fn aba(&mut self, lane: Lane, origin: ProcessId, ctx: &Ctx<'_, G>) -> &mut Aba {
        let id = self.id;
        self.lanes.entry(lane).or_default().abas.entry(origin).or_insert_with(|| {
            let tag = InstanceTag { election: id, kind: PrimitiveKind::Aba(lane), originator: origin };
            Aba::new(ctx.m, tag.to_bytes(), ctx.coin.clone())
        })
    }

    fn on_propose(&mut self, p: Proposal, ctx: &mut Ctx<'_, G>) {
        if !p.emergency {
            ctx.fx.timers.push((TimerKey::VoteWindow(self.id), Duration::from_millis(p.timeout_ms)));
        }
        self.proposal = Some(p);
        for lane in self.lane_set() {
            self.lanes.entry(*lane).or_default().accepting = true;
        }
        // Agreement instances may already have decided through Term messages.
        for lane in self.lane_set() {
            let decided: Vec<_> = self.lanes[lane]
                .abas
                .iter()
                .filter_map(|(o, a)| a.decision().map(|v| (*o, v)))
                .collect();
            for (o, v) in decided {
                self.on_decided(*lane, o, v, ctx);
            }
        }
        for o in self.valid.clone() {
            self.consider_all(o, ctx);
        }
        self.settle(ctx);
    }

    fn cast(&mut self, vote: G::Scalar, checked: bool, ctx: &mut Ctx<'_, G>) -> Result<(), Error> {
        if self.voted {
            return Err(Error::AlreadyVoted);
        }
        let me = ctx.m.me;
        let r = G::Scalar::random(ctx.rng);
        let c = commit::<G>(&vote, &r);
        let proof = if checked {
            BinaryProof::prove(&vote, &r, &c, ctx.rng)?
        } else {
            BinaryProof::prove_unchecked(&vote, &r, &c, ctx.rng)
        };
        self.voted = true;
        ctx.fx.events.push(VoterEvent::BallotCast {
            election: self.id,
            vote: vote.to_u64().unwrap_or(u64::MAX),
            commitment: c.to_canonical(),
        });
        let m = ctx.m;
        let step = self.avss.entry(me).or_insert_with(|| Avss::new(m, me)).share(vote, r, ctx.rng)?;
        self.on_avss_step(me, step, ctx);
        let step = self
            .proofs
            .entry(me)
            .or_insert_with(|| Brb::new(m, me))
            .broadcast(proof.to_canonical())?;
        self.on_brb_step(me, step, ctx);
        Ok(())
    }

    fn on_brb_step(&mut self, originator: ProcessId, step: BrbStep, ctx: &mut Ctx<'_, G>) {
        for t in step.messages {
            ctx.fx.send(dest(t.target), self.id, Body::Proof { originator, msg: t.message });
        }
        for bytes in step.output {
            self.proof_of.insert(originator, BinaryProof::from_canonical(&bytes).ok());
            self.on_material(originator, ctx);
        }
    }

    fn on_avss_step(&mut self, dealer: ProcessId, step: AvssStep<G>, ctx: &mut Ctx<'_, G>) {
        for t in step.messages {
            ctx.fx.send(dest(t.target), self.id, Body::Avss { dealer, msg: t.message });
        }
        for out in step.output {
            ctx.store.record(
                self.id,
                LoggedShare { origin: dealer, share: out.share, commitment: out.commitment.clone() },
            );
            ctx.fx.send(Destination::Daemon, self.id, Body::ShareReceipt { origin: dealer });
            ctx.fx.events.push(VoterEvent::ShareLogged { election: self.id, origin: dealer });
            self.shares.insert(dealer, out);
            self.on_material(dealer, ctx);
        }
    }

    fn on_aba_step(&mut self, lane: Lane, origin: ProcessId, step: AbaStep, ctx: &mut Ctx<'_, G>) {
        for t in step.messages {
            ctx.fx.send(dest(t.target), self.id, Body::Aba { lane, originator: origin, msg: t.message });
        }
        for v in step.output {
            if self.proposal.is_some() {
                self.on_decided(lane, origin, v, ctx);
            }
        }
    }

    /// Called whenever a share or a proof for `o` is delivered.
    fn on_material(&mut self, o: ProcessId, ctx: &mut Ctx<'_, G>) {
        if self.checked.contains(&o) {
            return;
        }
        let (Some(out), Some(proof)) = (self.shares.get(&o), self.proof_of.get(&o)) else {
            return;
        };
        self.checked.insert(o);
        let ok = match (proof, out.commitment.secret()) {
            (Some(p), Some(c)) => p.verify(c),
            _ => false,
        };
        if ok {
            self.valid.insert(o);
            self.consider_all(o, ctx);
        } else {
            ctx.fx.events.push(VoterEvent::ProofRejected { election: self.id, origin: o });
        }
        self.settle(ctx);
    }

    fn consider_all(&mut self, o: ProcessId, ctx: &mut Ctx<'_, G>) {
        for lane in self.lane_set() {
            self.consider(*lane, o, ctx);
        }
    }

    /// Decides whether to propose in `lane`'s agreement for origin `o`.
    fn consider(&mut self, lane: Lane, o: ProcessId, ctx: &mut Ctx<'_, G>) {
        if self.proposal.is_none() {
            return;
        }
        let state = self.lanes.entry(lane).or_default();
        if state.proposed.contains(&o) || state.decided.contains_key(&o) {
            return;
        }
        let accepting = state.accepting;
        match lane {
            Lane::Normal | Lane::Early => {
                if accepting && self.valid.contains(&o) {
                    self.propose(lane, o, true, ctx);
                }
            }
            Lane::Late => match self.lanes.get(&Lane::Early).and_then(|l| l.decided.get(&o)) {
                Some(true) => self.on_decided(Lane::Late, o, true, ctx),
                Some(false) if !accepting => self.propose(lane, o, false, ctx),
                Some(false) if self.valid.contains(&o) => self.propose(lane, o, true, ctx),
                _ => {}
            },
        }
    }

    fn propose(&mut self, lane: Lane, o: ProcessId, v: bool, ctx: &mut Ctx<'_, G>) {
        self.lanes.entry(lane).or_default().proposed.insert(o);
        if let Ok(step) = self.aba(lane, o, ctx).propose(v) {
            self.on_aba_step(lane, o, step, ctx);
        }
    }

    fn on_decided(&mut self, lane: Lane, o: ProcessId, v: bool, ctx: &mut Ctx<'_, G>) {
        let state = self.lanes.entry(lane).or_default();
        if state.decided.contains_key(&o) {
            return;
        }
        state.decided.insert(o, v);
        ctx.fx.events.push(VoterEvent::AbaDecided { election: self.id, lane, origin: o, value: v });
        if lane == Lane::Early {
            self.consider(Lane::Late, o, ctx);
        }
        self.settle(ctx);
    }

    fn settle(&mut self, ctx: &mut Ctx<'_, G>) {
        for lane in self.lane_set() {
            self.check_close(*lane, ctx);
            self.check_tally(*lane, ctx);
        }
    }

    fn check_close(&mut self, lane: Lane, ctx: &mut Ctx<'_, G>) {
        let Some(p) = &self.proposal else { return };
        let Some(state) = self.lanes.get(&lane) else { return };
        if !state.accepting {
            return;
        }
        let quorum = state.trues().count() >= ctx.m.n - ctx.m.f;
        let close = match lane {
            Lane::Normal => quorum && self.window_expired,
            Lane::Early => {
                let w: u64 = state.trues().map(|o| p.weight(o)).sum();
                quorum || p.threshold.halfway_to_one().met_by(w, p.total_weight())
            }
            Lane::Late => quorum,
        };
        if !close {
            return;
        }
        self.lanes.get_mut(&lane).unwrap().accepting = false;
        ctx.fx.events.push(VoterEvent::WindowClosed { election: self.id, lane });
        for o in ctx.m.ids() {
            let state = &self.lanes[&lane];
            if state.proposed.contains(&o) || state.decided.contains_key(&o) {
                continue;
            }
            if lane == Lane::Late {
                self.consider(lane, o, ctx);
            } else {
                self.propose(lane, o, false, ctx);
            }
        }
    }

    fn check_tally(&mut self, lane: Lane, ctx: &mut Ctx<'_, G>) {
        let Some(p) = &self.proposal else { return };
        let Some(state) = self.lanes.get(&lane) else { return };
        if state.tally_done || state.decided.len() < ctx.m.n {
            return;
        }
        let accepted: Vec<ProcessId> = state.trues().collect();
        if accepted.iter().any(|o| !self.shares.contains_key(o)) {
            return;
        }
        let rejected: BTreeSet<ProcessId> = ctx.m.ids().filter(|o| !accepted.contains(o)).collect();
        let weights: BTreeMap<ProcessId, u64> = match lane {
            Lane::Early => ctx.m.ids().map(|o| (o, if rejected.contains(&o) { 0 } else { p.weight(o) })).collect(),
            _ => resolve_all(&p.weights, &p.delegation, &rejected, p.max_weight).weights,
        };
        let weight_sum: u64 = accepted.iter().map(|o| weights[o]).sum();
        let early_short = lane == Lane::Early && !p.threshold.halfway_to_one().met_by(weight_sum, p.total_weight());
        self.lanes.get_mut(&lane).unwrap().tally_done = true;
        if accepted.is_empty() || early_short {
            if lane == Lane::Early {
                ctx.fx.events.push(VoterEvent::EarlyTallySkipped { election: self.id });
            }
            return;
        }
        let shares: Vec<_> = accepted.iter().map(|o| (self.shares[o].share, weights[o])).collect();
        let commits: Vec<_> = accepted.iter().map(|o| (self.shares[o].commitment.clone(), weights[o])).collect();
        let msg = PartialTallyMessage {
            lane,
            partial: share_linear_combine(&shares).expect("shares are all at this voter's index"),
            commitment: commit_weighted_combine(&commits).expect("commitments share the degree"),
            weight_sum,
        };
        ctx.fx.send(Destination::Daemon, self.id, Body::PartialTally(msg.clone()));
        ctx.fx.events.push(VoterEvent::PartialTallySent {
            election: self.id,
            lane,
            weight_sum,
            effective_weights: weights.into_iter().filter(|(o, _)| accepted.contains(o)).collect(),
        });
        self.tallies.insert(lane, msg);
        if let Some((op, evidence)) = self.pending_audit.take() {
            self.on_audit_request(op, evidence, ctx);
        }
    }

    /// Discloses the share log of `op` if `evidence` shows that this audit
    /// election was approved.
    fn on_audit_request(&mut self, op: ElectionId, evidence: Vec<PartialTallyMessage<G>>, ctx: &mut Ctx<'_, G>) {
        if self.audit_answered {
            return;
        }
        let Some(p) = &self.proposal else { return };
        if p.purpose != (Purpose::Audit { op }) {
            return;
        }
        let Some(own) = self.tallies.get(&Lane::Normal) else {
            self.pending_audit = Some((op, evidence));
            return;
        };
        let mut seen = BTreeSet::new();
        let matching: Vec<_> = evidence
            .iter()
            .filter(|m| {
                m.lane == Lane::Normal
                    && m.commitment == own.commitment
                    && m.weight_sum == own.weight_sum
                    && m.partial.verify(&own.commitment)
                    && seen.insert(m.partial.index)
            })
            .map(|m| m.partial)
            .collect();
        let approved = interpolate(&matching, ctx.m.f + 1)
            .ok()
            .and_then(|(t, _)| t.to_u64())
            .is_some_and(|t| t <= own.weight_sum && p.threshold.met_by(t, own.weight_sum));
        self.audit_answered = true;
        if approved {
            let entries = ctx.store.entries(op);
            ctx.fx.events.push(VoterEvent::AuditDisclosed { election: self.id, op, entries: entries.len() });
            ctx.fx.send(Destination::Daemon, self.id, Body::AuditShares { op, entries });
        } else {
            ctx.fx.events.push(VoterEvent::AuditRefused { election: self.id, op });
        }
    }

    fn footprint(&self) -> usize {
        let scalar = G::Scalar::ENCODED_LEN;
        let vc = |o: &AvssOutput<G>| o.commitment.coeffs.len() * G::ELEMENT_LEN + 2 * scalar;
        256 + self.avss.values().map(Avss::footprint).sum::<usize>()
            + self.proofs.values().map(Brb::footprint).sum::<usize>()
            + self.shares.values().map(vc).sum::<usize>()
            + self.proof_of.len() * (2 * G::ELEMENT_LEN + 2 * scalar + 32)
            + self
                .lanes
                .values()
                .map(|l| 64 + l.abas.values().map(Aba::footprint).sum::<usize>() + 16 * l.decided.len())
                .sum::<usize>()
    }
}
