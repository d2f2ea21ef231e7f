//! The discrete-event world: `n` voters and the daemon over a simulated
//! network. Every node runs the unmodified engine state machines; the world
//! owns model time, message delivery, CPU accounting and fault injection.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use privocracy_core::coin::{CommonCoin, SharedSeedCoin};
use privocracy_core::voting::{DaemonCore, DaemonEvent, Proposal, VoterEffects, VoterEvent, VoterNode};
use privocracy_core::wire::{Body, Destination, Endpoint, Envelope, TimerKey};
use privocracy_core::{ElectionId, Membership, ProcessId};
use privocracy_crypto::{exp_count, reset_exp_count, Group, Polynomial, RowPolynomials, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::adversary::Behavior;
use crate::model::{CostModel, NetworkModel};
use crate::policy::Policy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VoterSpec {
    pub policy: Policy,
    pub behavior: Option<Behavior>,
}

impl VoterSpec {
    pub fn honest(policy: Policy) -> Self {
        VoterSpec { policy, behavior: None }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WorldError {
    #[error("{got} adversarial voters exceed the fault bound f = {f}")]
    FaultBudget { got: usize, f: usize },
    #[error("need n >= 3f + 1 (n = {n}, f = {f})")]
    Resilience { n: usize, f: usize },
    #[error("expected {n} voter specs, got {got}")]
    VoterCount { n: usize, got: usize },
    #[error(transparent)]
    Engine(#[from] privocracy_core::Error),
}

/// Message and resource counters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    /// Network messages (self-deliveries excluded) by class.
    pub messages: BTreeMap<&'static str, u64>,
    pub events: u64,
    /// Peak bookkeeping bytes per voter, index `i - 1`.
    pub peak_footprint: Vec<usize>,
    pub exponentiations: u64,
}

impl Stats {
    pub fn total_messages(&self) -> u64 {
        self.messages.values().sum()
    }
}

enum Event<G: Group> {
    Deliver { from: Endpoint, to: Endpoint, persona: Option<u8>, env: Envelope<G> },
    Timer { voter: u32, persona: u8, key: TimerKey },
}

struct Queued<G: Group> {
    key: (u64, u64, u64),
    event: Event<G>,
}

impl<G: Group> PartialEq for Queued<G> {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl<G: Group> Eq for Queued<G> {}
impl<G: Group> PartialOrd for Queued<G> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<G: Group> Ord for Queued<G> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key.cmp(&o.key)
    }
}

struct Participant<G: Group> {
    behavior: Option<Behavior>,
    personas: Vec<VoterNode<G>>,
    crashed: bool,
}

pub struct World<G: Group> {
    n: usize,
    f: usize,
    now: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<Queued<G>>>,
    voters: Vec<Participant<G>>,
    daemon: DaemonCore<G>,
    /// Index 0 is the daemon.
    busy_until: Vec<u64>,
    rng: ChaCha20Rng,
    net: NetworkModel,
    cost: CostModel,
    max_events: u64,
    pub stats: Stats,
    pub voter_log: Vec<(u64, u32, u8, VoterEvent)>,
    pub daemon_log: Vec<(u64, DaemonEvent)>,
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RunEnd {
    /// Nothing left to deliver.
    Quiescent,
    /// The event budget ran out, e.g. a livelock.
    EventLimit,
}

impl<G: Group> World<G> {
    pub fn new(
        f: usize,
        seed: u64,
        voters: &[VoterSpec],
        net: NetworkModel,
        cost: CostModel,
    ) -> Result<Self, WorldError> {
        let coin: Arc<dyn CommonCoin> = Arc::new(SharedSeedCoin::from_u64(seed));
        Self::with_coin(f, seed, voters, net, cost, coin)
    }

    pub fn with_coin(
        f: usize,
        seed: u64,
        voters: &[VoterSpec],
        net: NetworkModel,
        cost: CostModel,
        coin: Arc<dyn CommonCoin>,
    ) -> Result<Self, WorldError> {
        let n = voters.len();
        if n < 3 * f + 1 {
            return Err(WorldError::Resilience { n, f });
        }
        let bad = voters.iter().filter(|v| v.behavior.is_some()).count();
        if bad > f {
            return Err(WorldError::FaultBudget { got: bad, f });
        }
        let parts = voters
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let m = Membership::new(n, f, ProcessId(i as u32 + 1));
                let node_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64);
                let persona = |p: Policy, k: u64| VoterNode::new(m, coin.clone(), node_seed + k, p.source(node_seed ^ k));
                let personas = match spec.behavior {
                    Some(Behavior::Equivocate) => vec![persona(spec.policy, 0), persona(spec.policy.inverted(), 1)],
                    Some(Behavior::InvalidVote { .. }) => vec![persona(Policy::Abstain, 0)],
                    _ => vec![persona(spec.policy, 0)],
                };
                Participant { behavior: spec.behavior, personas, crashed: matches!(spec.behavior, Some(Behavior::Silent)) }
            })
            .collect();
        Ok(World {
            n,
            f,
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            voters: parts,
            daemon: DaemonCore::new(n, f, seed ^ 0xda),
            busy_until: vec![0; n + 1],
            rng: ChaCha20Rng::seed_from_u64(seed),
            net,
            cost,
            max_events: 20_000_000,
            stats: Stats { peak_footprint: vec![0; n], ..Stats::default() },
            voter_log: Vec::new(),
            daemon_log: Vec::new(),
        })
    }

    pub fn set_max_events(&mut self, max: u64) {
        self.max_events = max;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    /// Model time in microseconds.
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn daemon(&self) -> &DaemonCore<G> {
        &self.daemon
    }

    pub fn behavior(&self, voter: u32) -> Option<Behavior> {
        self.voters[voter as usize - 1].behavior
    }

    pub fn is_correct(&self, voter: u32) -> bool {
        self.behavior(voter).is_none()
    }

    /// The first (or only) persona of `voter`.
    pub fn voter(&self, voter: u32) -> &VoterNode<G> {
        &self.voters[voter as usize - 1].personas[0]
    }

    pub fn voter_mut(&mut self, voter: u32) -> &mut VoterNode<G> {
        &mut self.voters[voter as usize - 1].personas[0]
    }

    /// Starts an election now.
    pub fn issue(&mut self, proposal: Proposal) -> Result<ElectionId, WorldError> {
        let (id, fx) = self.daemon.issue(proposal)?;
        self.daemon_log.extend(fx.events.into_iter().map(|e| (self.now, e)));
        for (d, env) in fx.messages {
            self.send(Endpoint::Daemon, 0, d, env, self.now);
        }
        Ok(id)
    }

    /// Starts an audit of `op` now.
    pub fn issue_audit(&mut self, op: ElectionId, timeout_ms: u64) -> Result<ElectionId, WorldError> {
        let p = self.daemon.audit_proposal("auditor", op, timeout_ms);
        self.issue(p)
    }

    /// Feeds an external effect batch (e.g. a manual vote) from `voter`.
    pub fn inject(&mut self, voter: u32, fx: VoterEffects<G>) {
        self.apply_voter_effects(voter, 0, fx, self.now);
    }

    pub fn run(&mut self) -> RunEnd {
        while let Some(Reverse(q)) = self.queue.pop() {
            if self.stats.events >= self.max_events {
                return RunEnd::EventLimit;
            }
            let (time, _, _) = q.key;
            let node = match &q.event {
                Event::Deliver { to: Endpoint::Daemon, .. } => 0,
                Event::Deliver { to: Endpoint::Voter(p), .. } => p.0 as usize,
                Event::Timer { voter, .. } => *voter as usize,
            };
            // A busy node handles the input once it is free.
            if self.busy_until[node] > time {
                let at = self.busy_until[node];
                self.push(at, q.event);
                continue;
            }
            self.now = time;
            self.stats.events += 1;
            self.dispatch(q.event);
        }
        RunEnd::Quiescent
    }

    fn push(&mut self, at: u64, event: Event<G>) {
        self.seq += 1;
        let tiebreak = self.rng.gen();
        self.queue.push(Reverse(Queued { key: (at, tiebreak, self.seq), event }));
    }

    fn dispatch(&mut self, event: Event<G>) {
        reset_exp_count();
        match event {
            Event::Deliver { from, to: Endpoint::Daemon, env, .. } => {
                let fx = self.daemon.handle(from, env);
                let done = self.charge(0);
                self.daemon_log.extend(fx.events.into_iter().map(|e| (done, e)));
                for (d, env) in fx.messages {
                    self.send(Endpoint::Daemon, 0, d, env, done);
                }
            }
            Event::Deliver { from, to: Endpoint::Voter(p), persona, env } => {
                let i = p.0;
                self.check_crash(i);
                let part = &mut self.voters[i as usize - 1];
                if part.crashed {
                    return;
                }
                let is_propose = matches!(env.body, Body::Propose(_));
                let election = env.election;
                let targets: Vec<u8> = match persona {
                    Some(k) => vec![k],
                    None => (0..part.personas.len() as u8).collect(),
                };
                let mut outs = Vec::new();
                for k in targets {
                    let mut fx = part.personas[k as usize].handle_message(from, env.clone());
                    if let (true, Some(Behavior::InvalidVote { value })) = (is_propose, part.behavior) {
                        if let Ok(more) = part.personas[k as usize].cast_unchecked(election, value) {
                            fx.extend(more);
                        }
                    }
                    outs.push((k, fx));
                }
                let done = self.charge(i as usize);
                for (k, fx) in outs {
                    self.apply_voter_effects(i, k, fx, done);
                }
                self.sample_footprint(i);
            }
            Event::Timer { voter, persona, key } => {
                self.check_crash(voter);
                let part = &mut self.voters[voter as usize - 1];
                if part.crashed {
                    return;
                }
                let fx = part.personas[persona as usize].handle_timer(key);
                let done = self.charge(voter as usize);
                self.apply_voter_effects(voter, persona, fx, done);
            }
        }
    }

    fn check_crash(&mut self, voter: u32) {
        let part = &mut self.voters[voter as usize - 1];
        if let Some(Behavior::CrashAt { step }) = part.behavior {
            if self.stats.events >= step {
                part.crashed = true;
            }
        }
    }

    /// Charges the CPU model for the input just handled; returns the time
    /// at which the node's outputs leave.
    fn charge(&mut self, node: usize) -> u64 {
        let exps = exp_count();
        self.stats.exponentiations += exps;
        let done = self.now + self.cost.charge(exps);
        self.busy_until[node] = done;
        done
    }

    fn sample_footprint(&mut self, voter: u32) {
        let part = &self.voters[voter as usize - 1];
        let fp = part.personas.iter().map(VoterNode::footprint).sum::<usize>();
        let slot = &mut self.stats.peak_footprint[voter as usize - 1];
        *slot = (*slot).max(fp);
    }

    fn apply_voter_effects(&mut self, voter: u32, persona: u8, fx: VoterEffects<G>, at: u64) {
        for (key, d) in fx.timers {
            let when = at + d.as_micros() as u64;
            self.push(when, Event::Timer { voter, persona, key });
        }
        self.voter_log.extend(fx.events.into_iter().map(|e| (at, voter, persona, e)));
        let from = Endpoint::Voter(ProcessId(voter));
        for (d, env) in fx.messages {
            self.send(from, persona, d, env, at);
        }
    }

    fn send(&mut self, from: Endpoint, persona: u8, dest: Destination, env: Envelope<G>, at: u64) {
        let targets: Vec<Endpoint> = match dest {
            Destination::Daemon => vec![Endpoint::Daemon],
            Destination::Voter(p) => vec![Endpoint::Voter(p)],
            Destination::AllVoters => (1..=self.n as u32).map(|i| Endpoint::Voter(ProcessId(i))).collect(),
        };
        let behavior = match from {
            Endpoint::Voter(p) => self.voters[p.0 as usize - 1].behavior,
            Endpoint::Daemon => None,
        };
        for to in targets {
            let is_self = from == to;
            let mut env = env.clone();
            let mut extra = 0;
            if let (Endpoint::Voter(me), Some(b)) = (from, behavior) {
                if !is_self {
                    match b {
                        Behavior::Silent => continue,
                        Behavior::Equivocate => {
                            let ok = match to {
                                Endpoint::Daemon => persona == 0,
                                Endpoint::Voter(j) => self.half(me, j) == persona,
                            };
                            if !ok {
                                continue;
                            }
                        }
                        Behavior::InvalidShares => self.corrupt(me, to, &mut env),
                        Behavior::DelayAll { extra_ms } => extra = self.rng.gen_range(0..=extra_ms * 1000),
                        Behavior::CrashAt { .. } | Behavior::InvalidVote { .. } => {}
                    }
                }
            }
            let delay = if is_self { 0 } else { self.net.delay_us(self.stats.events, &mut self.rng) + extra };
            if !is_self {
                *self.stats.messages.entry(env.body.class()).or_default() += 1;
            }
            let persona = is_self.then_some(persona);
            self.push(at + delay, Event::Deliver { from, to, persona, env });
        }
    }

    /// Which of an equivocator's personas talks to voter `j`.
    fn half(&self, me: ProcessId, j: ProcessId) -> u8 {
        let rank = if j.0 > me.0 { j.0 - 2 } else { j.0 - 1 };
        u8::from(rank as usize >= (self.n - 1) / 2)
    }

    fn corrupt(&mut self, me: ProcessId, to: Endpoint, env: &mut Envelope<G>) {
        let victims: Vec<u32> = (1..=self.n as u32).filter(|j| *j != me.0).take(self.f).collect();
        let rng = &mut self.rng;
        match &mut env.body {
            Body::Avss { dealer, msg: privocracy_core::avss::AvssMessage::Row { row } } if *dealer == me => {
                if matches!(to, Endpoint::Voter(j) if victims.contains(&j.0)) {
                    let d = row.vote.degree();
                    *row = RowPolynomials {
                        vote: Polynomial::random(G::Scalar::random(rng), d, rng),
                        blinding: Polynomial::random(G::Scalar::random(rng), d, rng),
                    };
                }
            }
            Body::Avss { msg: privocracy_core::avss::AvssMessage::Point { value, .. }, .. } => {
                *value = *value + G::Scalar::one();
            }
            Body::PartialTally(m) => m.partial.value = m.partial.value + G::Scalar::one(),
            _ => {}
        }
    }
}

impl<G: Group> World<G> {
    /// Crashes `voter` now, e.g. to withhold its share log from an audit.
    /// Counts against the fault budget.
    pub fn crash_now(&mut self, voter: u32) -> Result<(), WorldError> {
        let already = self.voters[voter as usize - 1].behavior.is_some();
        let bad = self.voters.iter().filter(|v| v.behavior.is_some()).count();
        if !already && bad + 1 > self.f {
            return Err(WorldError::FaultBudget { got: bad + 1, f: self.f });
        }
        let part = &mut self.voters[voter as usize - 1];
        part.behavior.get_or_insert(Behavior::CrashAt { step: self.stats.events });
        part.crashed = true;
        Ok(())
    }

    /// Ballots cast by `voter`'s personas in `election`: (vote, commitment).
    pub fn ballots(&self, voter: u32, election: ElectionId) -> Vec<(u64, Vec<u8>)> {
        self.voter_log
            .iter()
            .filter_map(|(_, v, _, e)| match e {
                VoterEvent::BallotCast { election: el, vote, commitment } if *v == voter && *el == election => {
                    Some((*vote, commitment.clone()))
                }
                _ => None,
            })
            .collect()
    }

    /// When the daemon recorded its decision for `election`.
    pub fn decided_at(&self, election: ElectionId) -> Option<u64> {
        self.daemon_log.iter().find_map(|(t, e)| match e {
            DaemonEvent::Decided(d) if d.election == election => Some(*t),
            _ => None,
        })
    }
}
