//! Schedule exploration.
//!
//! Primitive runs use a queue scheduler: at each step one pending message
//! is chosen for delivery. The first [`SYSTEMATIC_DEPTH`] choices of
//! schedule `s` enumerate every prefix of width [`SYSTEMATIC_WIDTH`] in
//! mixed radix; the remaining choices are seeded-random. After each run the
//! relevant invariants are checked at quiescence, which is where totality
//! and termination are owed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::sync::Arc;

use privocracy_core::aba::{Aba, AbaMessage};
use privocracy_core::avss::{Avss, AvssMessage, AvssOutput};
use privocracy_core::brb::{Brb, BrbMessage};
use privocracy_core::coin::SharedSeedCoin;
use privocracy_core::step::{Step, Target};
use privocracy_core::{Membership, ProcessId};
use privocracy_crypto::{interpolate, Dealing, Group, Polynomial, RowPolynomials, Scalar, SymmetricDealing};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::adversary::Behavior;
use crate::policy::Policy;
use crate::scenario::{run_scenario, AdversarySpec, ScenarioError, ScenarioSpec};

pub const SYSTEMATIC_DEPTH: u32 = 6;
pub const SYSTEMATIC_WIDTH: u64 = 4;
const TRACE_TAIL: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Primitive {
    Brb,
    Aba,
    Avss,
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub primitive: Primitive,
    pub behavior: Option<Behavior>,
    pub schedule: u64,
    pub property: String,
    /// The last deliveries before the violation was detected.
    pub trace: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ExploreReport {
    pub runs: u64,
    pub messages: u64,
    pub violations: Vec<Counterexample>,
}

struct Msg<M> {
    from: u32,
    to: u32,
    /// Set for messages addressed to one persona of the Byzantine node.
    persona: Option<u8>,
    msg: M,
}

struct Scheduler {
    rng: ChaCha20Rng,
    schedule: u64,
    step: u32,
    /// Messages from this node go last.
    slow: Option<u32>,
    pub delivered: u64,
    trace: Vec<String>,
}

impl Scheduler {
    fn new(schedule: u64, seed: u64, slow: Option<u32>) -> Self {
        Scheduler {
            rng: ChaCha20Rng::seed_from_u64(seed ^ schedule.wrapping_mul(0x2545_f491_4f6c_dd1d)),
            schedule,
            step: 0,
            slow,
            delivered: 0,
            trace: Vec::new(),
        }
    }

    fn pick<M: Debug>(&mut self, pending: &mut Vec<Msg<M>>) -> Msg<M> {
        let candidates: Vec<usize> = match self.slow {
            Some(b) if pending.iter().any(|m| m.from != b) => (0..pending.len()).filter(|i| pending[*i].from != b).collect(),
            _ => (0..pending.len()).collect(),
        };
        let k = if self.step < SYSTEMATIC_DEPTH {
            let digit = (self.schedule / SYSTEMATIC_WIDTH.pow(self.step)) % SYSTEMATIC_WIDTH;
            (digit as usize).min(candidates.len() - 1)
        } else {
            self.rng.gen_range(0..candidates.len())
        };
        self.step += 1;
        let m = pending.swap_remove(candidates[k]);
        if m.from != m.to {
            self.delivered += 1;
        }
        if self.trace.len() == TRACE_TAIL {
            self.trace.remove(0);
        }
        self.trace.push(format!("{} -> {}: {:?}", m.from, m.to, m.msg));
        m
    }
}

fn push_step<M: Clone, O>(
    pending: &mut Vec<Msg<M>>,
    n: usize,
    from: u32,
    persona: Option<u8>,
    step: Step<M, O>,
    allowed: impl Fn(u32) -> bool,
) -> Vec<O> {
    for t in step.messages {
        let targets: Vec<u32> = match t.target {
            Target::All => (1..=n as u32).collect(),
            Target::Node(p) => vec![p.0],
        };
        for to in targets {
            if to == from || allowed(to) {
                let persona = if to == from { persona } else { None };
                pending.push(Msg { from, to, persona, msg: t.message.clone() });
            }
        }
    }
    step.output
}

/// Which persona of an equivocating node `b` talks to `j`.
fn half(n: usize, b: u32, j: u32) -> u8 {
    let rank = if j > b { j - 2 } else { j - 1 };
    u8::from(rank as usize >= (n - 1) / 2)
}

struct Byz {
    id: u32,
    behavior: Behavior,
    crash_step: u64,
}

impl Byz {
    fn new(id: u32, behavior: Behavior, rng: &mut ChaCha20Rng) -> Self {
        let crash_step = match behavior {
            // Vary the crash point across schedules.
            Behavior::CrashAt { step } => rng.gen_range(0..=step),
            _ => u64::MAX,
        };
        Byz { id, behavior, crash_step }
    }

    fn personas(&self) -> u8 {
        if self.behavior == Behavior::Equivocate {
            2
        } else {
            1
        }
    }

    fn alive(&self, delivered: u64) -> bool {
        self.behavior != Behavior::Silent && delivered < self.crash_step
    }

    fn talks_to(&self, n: usize, persona: u8, j: u32) -> bool {
        self.behavior != Behavior::Equivocate || half(n, self.id, j) == persona
    }

    fn slow(&self) -> Option<u32> {
        matches!(self.behavior, Behavior::DelayAll { .. }).then_some(self.id)
    }
}

pub fn explore_primitive<G: Group>(
    primitive: Primitive,
    n: usize,
    f: usize,
    behavior: Option<Behavior>,
    schedules: u64,
    seed: u64,
) -> ExploreReport {
    let mut report = ExploreReport::default();
    for s in 0..schedules {
        let (delivered, result) = match primitive {
            Primitive::Brb => run_brb(n, f, behavior, s, seed),
            Primitive::Aba => run_aba(n, f, behavior, s, seed),
            Primitive::Avss => run_avss::<G>(n, f, behavior, s, seed),
        };
        report.runs += 1;
        report.messages += delivered;
        if let Err((property, trace)) = result {
            report.violations.push(Counterexample { primitive, behavior, schedule: s, property, trace });
        }
    }
    report
}

type RunResult = (u64, Result<(), (String, Vec<String>)>);

fn fail(sched: &Scheduler, property: String) -> RunResult {
    (sched.delivered, Err((property, sched.trace.clone())))
}

fn run_brb(n: usize, f: usize, behavior: Option<Behavior>, s: u64, seed: u64) -> RunResult {
    let origin = 1u32;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ s);
    let byz = behavior.map(|b| Byz::new(origin, b, &mut rng));
    let mut sched = Scheduler::new(s, seed, byz.as_ref().and_then(Byz::slow));
    let m = |i: u32| Membership::new(n, f, ProcessId(i));
    let mut nodes: BTreeMap<u32, Brb> =
        (1..=n as u32).filter(|i| byz.is_none() || *i != origin).map(|i| (i, Brb::new(m(i), ProcessId(origin)))).collect();
    let mut personas: Vec<Brb> = (0..byz.as_ref().map_or(0, Byz::personas)).map(|_| Brb::new(m(origin), ProcessId(origin))).collect();
    let mut pending = Vec::new();
    let value = b"value-a".to_vec();
    match &byz {
        None => {
            let step = nodes.get_mut(&origin).unwrap().broadcast(value.clone()).unwrap();
            push_step(&mut pending, n, origin, None, step, |_| true);
        }
        Some(b) if b.behavior == Behavior::Silent => {}
        Some(b) => {
            for (k, p) in personas.iter_mut().enumerate() {
                let v = if k == 0 { value.clone() } else { b"value-b".to_vec() };
                let step = p.broadcast(v).unwrap();
                push_step(&mut pending, n, origin, Some(k as u8), step, |j| b.talks_to(n, k as u8, j));
            }
            if matches!(b.behavior, Behavior::InvalidShares | Behavior::InvalidVote { .. }) {
                for j in 2..=n as u32 {
                    for msg in [BrbMessage::Echo(b"forged".to_vec()), BrbMessage::Ready(b"forged".to_vec())] {
                        pending.push(Msg { from: origin, to: j, persona: None, msg });
                    }
                }
            }
        }
    }
    let mut delivered: BTreeMap<u32, Vec<u8>> = BTreeMap::new();
    while !pending.is_empty() {
        let msg = sched.pick(&mut pending);
        if let Some(node) = nodes.get_mut(&msg.to) {
            let step = node.handle(ProcessId(msg.from), msg.msg);
            for out in push_step(&mut pending, n, msg.to, None, step, |_| true) {
                if delivered.insert(msg.to, out).is_some() {
                    return fail(&sched, format!("BRB no-duplication at {}", msg.to));
                }
            }
        } else if let Some(b) = &byz {
            if !b.alive(sched.delivered) {
                continue;
            }
            let targets: Vec<u8> = msg.persona.map_or((0..personas.len() as u8).collect(), |k| vec![k]);
            for k in targets {
                let step = personas[k as usize].handle(ProcessId(msg.from), msg.msg.clone());
                push_step(&mut pending, n, origin, Some(k), step, |j| b.talks_to(n, k, j));
            }
        }
    }
    let values: BTreeSet<&Vec<u8>> = delivered.values().collect();
    if values.len() > 1 {
        return fail(&sched, "BRB consistency".into());
    }
    if !delivered.is_empty() && delivered.len() != nodes.len() {
        return fail(&sched, format!("BRB totality: {} of {} delivered", delivered.len(), nodes.len()));
    }
    let honest_origin = matches!(behavior, None | Some(Behavior::DelayAll { .. }));
    if honest_origin && (delivered.len() != nodes.len() || values.iter().any(|v| **v != value)) {
        return fail(&sched, "BRB validity".into());
    }
    (sched.delivered, Ok(()))
}

fn run_aba(n: usize, f: usize, behavior: Option<Behavior>, s: u64, seed: u64) -> RunResult {
    let b_id = n as u32;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ s);
    let byz = behavior.map(|b| Byz::new(b_id, b, &mut rng));
    let mut sched = Scheduler::new(s, seed, byz.as_ref().and_then(Byz::slow));
    let coin = Arc::new(SharedSeedCoin::from_u64(seed ^ s.rotate_left(17)));
    let tag = b"explore-aba".to_vec();
    let m = |i: u32| Membership::new(n, f, ProcessId(i));
    let correct: Vec<u32> = (1..=n as u32).filter(|i| byz.is_none() || *i != b_id).collect();
    let mut nodes: BTreeMap<u32, Aba> = correct.iter().map(|i| (*i, Aba::new(m(*i), tag.clone(), coin.clone()))).collect();
    let mut personas: Vec<Aba> =
        (0..byz.as_ref().map_or(0, Byz::personas)).map(|_| Aba::new(m(b_id), tag.clone(), coin.clone())).collect();
    // Schedules alternate between unanimous and split inputs.
    let proposals: BTreeMap<u32, bool> = correct
        .iter()
        .map(|i| (*i, if s % 3 == 0 { s % 2 == 0 } else { rng.gen() }))
        .collect();
    let mut pending = Vec::new();
    for (i, v) in &proposals {
        let step = nodes.get_mut(i).unwrap().propose(*v).unwrap();
        push_step(&mut pending, n, *i, None, step, |_| true);
    }
    if let Some(b) = &byz {
        if b.behavior != Behavior::Silent {
            for (k, p) in personas.iter_mut().enumerate() {
                let v = if b.behavior == Behavior::Equivocate { k == 1 } else { rng.gen() };
                let step = p.propose(v).unwrap();
                push_step(&mut pending, n, b_id, Some(k as u8), step, |j| b.talks_to(n, k as u8, j));
            }
        }
        if matches!(b.behavior, Behavior::InvalidShares | Behavior::InvalidVote { .. }) {
            let minority = proposals.values().filter(|v| **v).count() * 2 < proposals.len();
            for &j in &correct {
                for round in 1..=4 {
                    for value in [false, true] {
                        pending.push(Msg { from: b_id, to: j, persona: None, msg: AbaMessage::BVal { round, value } });
                        pending.push(Msg { from: b_id, to: j, persona: None, msg: AbaMessage::Aux { round, value } });
                    }
                }
                pending.push(Msg { from: b_id, to: j, persona: None, msg: AbaMessage::Term { value: minority } });
            }
        }
    }
    let mut decided: BTreeMap<u32, bool> = BTreeMap::new();
    while !pending.is_empty() {
        let msg = sched.pick(&mut pending);
        if let Some(node) = nodes.get_mut(&msg.to) {
            let step = node.handle(ProcessId(msg.from), msg.msg);
            for out in push_step(&mut pending, n, msg.to, None, step, |_| true) {
                if decided.insert(msg.to, out).is_some() {
                    return fail(&sched, format!("ABA decided twice at {}", msg.to));
                }
            }
        } else if let Some(b) = &byz {
            if !b.alive(sched.delivered) || matches!(b.behavior, Behavior::InvalidShares | Behavior::InvalidVote { .. }) {
                continue;
            }
            let targets: Vec<u8> = msg.persona.map_or((0..personas.len() as u8).collect(), |k| vec![k]);
            for k in targets {
                let step = personas[k as usize].handle(ProcessId(msg.from), msg.msg.clone());
                push_step(&mut pending, n, b_id, Some(k), step, |j| b.talks_to(n, k, j));
            }
        }
    }
    if decided.len() != correct.len() {
        return fail(&sched, format!("ABA termination: {} of {} decided", decided.len(), correct.len()));
    }
    let values: BTreeSet<bool> = decided.values().copied().collect();
    if values.len() != 1 {
        return fail(&sched, "ABA agreement".into());
    }
    let inputs: BTreeSet<bool> = proposals.values().copied().collect();
    if inputs.len() == 1 && inputs != values {
        return fail(&sched, "ABA validity".into());
    }
    (sched.delivered, Ok(()))
}

fn run_avss<G: Group>(n: usize, f: usize, behavior: Option<Behavior>, s: u64, seed: u64) -> RunResult {
    let dealer = 1u32;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ s);
    let byz = behavior.map(|b| Byz::new(dealer, b, &mut rng));
    let mut sched = Scheduler::new(s, seed, byz.as_ref().and_then(Byz::slow));
    let m = |i: u32| Membership::new(n, f, ProcessId(i));
    let mut nodes: BTreeMap<u32, Avss<G>> =
        (1..=n as u32).filter(|i| byz.is_none() || *i != dealer).map(|i| (i, Avss::new(m(i), ProcessId(dealer)))).collect();
    let mut personas: Vec<Avss<G>> =
        (0..byz.as_ref().map_or(0, Byz::personas)).map(|_| Avss::new(m(dealer), ProcessId(dealer))).collect();
    let vote = match behavior {
        Some(Behavior::InvalidVote { value }) => value,
        _ => 1,
    };
    let dealing = |v: u64, rng: &mut ChaCha20Rng| {
        SymmetricDealing::extend(&Dealing::<G>::random(G::Scalar::from_u64(v), G::Scalar::random(rng), f + 1, rng), rng)
    };
    let victims: Vec<u32> = (2..=n as u32).take(f).collect();
    let mut pending: Vec<Msg<AvssMessage<G>>> = Vec::new();
    match &byz {
        None => {
            let d = dealing(vote, &mut rng);
            let step = nodes.get_mut(&dealer).unwrap().deal(&d).unwrap();
            push_step(&mut pending, n, dealer, None, step, |_| true);
        }
        Some(b) if b.behavior == Behavior::Silent => {}
        Some(b) => {
            for (k, p) in personas.iter_mut().enumerate() {
                let d = dealing(if k == 0 { vote } else { 1 - vote.min(1) }, &mut rng);
                let step = p.deal(&d).unwrap();
                push_step(&mut pending, n, dealer, Some(k as u8), step, |j| b.talks_to(n, k as u8, j));
            }
        }
    }
    let corrupting = matches!(behavior, Some(Behavior::InvalidShares));
    let corrupt = |pending: &mut Vec<Msg<AvssMessage<G>>>, rng: &mut ChaCha20Rng| {
        for msg in pending.iter_mut().filter(|m| m.from == dealer && m.to != dealer) {
            match &mut msg.msg {
                AvssMessage::Row { row } if victims.contains(&msg.to) => {
                    *row = RowPolynomials {
                        vote: Polynomial::random(G::Scalar::random(rng), f, rng),
                        blinding: Polynomial::random(G::Scalar::random(rng), f, rng),
                    }
                }
                AvssMessage::Point { value, .. } => *value = *value + G::Scalar::one(),
                _ => {}
            }
        }
    };
    if corrupting {
        corrupt(&mut pending, &mut rng);
    }
    let mut outs: BTreeMap<u32, AvssOutput<G>> = BTreeMap::new();
    while !pending.is_empty() {
        let msg = sched.pick(&mut pending);
        if let Some(node) = nodes.get_mut(&msg.to) {
            let step = node.handle(ProcessId(msg.from), msg.msg);
            for out in push_step(&mut pending, n, msg.to, None, step, |_| true) {
                if outs.insert(msg.to, out).is_some() {
                    return fail(&sched, format!("AVSS completed twice at {}", msg.to));
                }
            }
        } else if let Some(b) = &byz {
            if !b.alive(sched.delivered) {
                continue;
            }
            let targets: Vec<u8> = msg.persona.map_or((0..personas.len() as u8).collect(), |k| vec![k]);
            let before = pending.len();
            for k in targets {
                let step = personas[k as usize].handle(ProcessId(msg.from), msg.msg.clone());
                push_step(&mut pending, n, dealer, Some(k), step, |j| b.talks_to(n, k, j));
            }
            if corrupting {
                let mut fresh = pending.split_off(before);
                corrupt(&mut fresh, &mut rng);
                pending.extend(fresh);
            }
        }
    }
    if !outs.is_empty() && outs.len() != nodes.len() {
        return fail(&sched, format!("AVSS totality: {} of {} completed", outs.len(), nodes.len()));
    }
    if let Some(first) = outs.values().next() {
        if outs.values().any(|o| o.commitment != first.commitment || !o.share.verify(&o.commitment)) {
            return fail(&sched, "AVSS agreement: commitments differ".into());
        }
        let shares: Vec<_> = outs.values().map(|o| o.share).collect();
        let secret = interpolate(&shares, f + 1).unwrap().0;
        for k in 1..=shares.len() - (f + 1) {
            if interpolate(&shares[k..], f + 1).unwrap().0 != secret {
                return fail(&sched, "AVSS agreement: shares off one polynomial".into());
            }
        }
        let dealt_plainly = matches!(behavior, None | Some(Behavior::DelayAll { .. }) | Some(Behavior::InvalidVote { .. }) | Some(Behavior::InvalidShares));
        if dealt_plainly && secret != G::Scalar::from_u64(vote) {
            return fail(&sched, "AVSS validity: wrong secret".into());
        }
    }
    if matches!(behavior, None | Some(Behavior::DelayAll { .. }) | Some(Behavior::InvalidVote { .. })) && outs.len() != nodes.len() {
        return fail(&sched, "AVSS validity: honest dealing incomplete".into());
    }
    (sched.delivered, Ok(()))
}

/// Network messages of one fault-free reliable broadcast.
pub fn brb_message_count(n: usize, f: usize, seed: u64) -> u64 {
    let (delivered, result) = run_brb(n, f, None, seed, seed);
    assert!(result.is_ok());
    delivered
}

/// Voting-level exploration: the same scenario under many seeds with an
/// unstable network for the first `gst_step` events.
pub fn explore_votes(base: &ScenarioSpec, schedules: u64) -> Vec<(u64, crate::analysis::Violation)> {
    let mut out = Vec::new();
    for s in 0..schedules {
        let mut spec = base.clone();
        spec.seed = base.seed.wrapping_add(s);
        match run_scenario(&spec) {
            Ok(m) => out.extend(m.election.violations.into_iter().map(|v| (spec.seed, v))),
            Err(e) => panic!("invalid scenario: {e}"),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Synchronous from the start.
    Stable,
    /// Random delays up to `pre_gst_max_ms` for the first events.
    PreGst,
    /// Stable network, emergency election.
    Emergency,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepFailure {
    pub n: usize,
    pub behavior: Behavior,
    pub policy: Policy,
    pub regime: Regime,
    pub seed: u64,
    pub violation: crate::analysis::Violation,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VotingSweep {
    pub runs: u64,
    pub synchronous_runs: u64,
    pub decided: u64,
    /// Correct ballots left out of a tally, summed over runs.
    pub correct_excluded: u64,
    pub failures: Vec<SweepFailure>,
}

/// Every behavior in the catalog, played by f voters, against each
/// policy and network regime.
pub fn behavior_sweep(ns: &[usize], seeds: u64, base_seed: u64) -> Result<VotingSweep, ScenarioError> {
    let mut out = VotingSweep::default();
    for &n in ns {
        let f = (n - 1) / 3;
        for behavior in Behavior::catalog(60, 40) {
            for policy in [Policy::Yes, Policy::No, Policy::Random] {
                for regime in [Regime::Stable, Regime::PreGst, Regime::Emergency] {
                    for s in 0..seeds {
                        let seed = base_seed.wrapping_add(s);
                        let mut spec = ScenarioSpec::new(n, seed);
                        spec.policy = policy;
                        spec.emergency = regime == Regime::Emergency;
                        if regime == Regime::PreGst {
                            spec.gst_step = 30 * n as u64;
                        }
                        spec.adversary = (0..f)
                            .map(|k| AdversarySpec { voter: 1 + ((s as usize + k) % n) as u32, behavior })
                            .collect();
                        let m = run_scenario(&spec)?;
                        out.runs += 1;
                        out.synchronous_runs += u64::from(spec.expects_synchrony());
                        out.decided += u64::from(m.election.decision.is_some());
                        out.correct_excluded += (n - spec.adversary.len() - m.election.correct_accepted) as u64;
                        for violation in m.election.violations {
                            out.failures.push(SweepFailure { n, behavior, policy, regime, seed, violation });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use privocracy_crypto::Tiny83;

    use super::*;

    #[test]
    fn fault_free_runs_pass() {
        for p in [Primitive::Brb, Primitive::Aba, Primitive::Avss] {
            let r = explore_primitive::<Tiny83>(p, 4, 1, None, 50, 1);
            assert!(r.violations.is_empty(), "{p:?}: {:?}", r.violations.first());
        }
    }

    #[test]
    fn systematic_prefixes_differ() {
        let mut a = Scheduler::new(0, 9, None);
        let mut b = Scheduler::new(1, 9, None);
        let mk = || (0..4).map(|i| Msg { from: i, to: 0, persona: None, msg: i }).collect::<Vec<_>>();
        assert_ne!(a.pick(&mut mk()).msg, b.pick(&mut mk()).msg);
    }
}
