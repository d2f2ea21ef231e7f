//! Randomized asynchronous binary agreement.
//!
//! Rounds follow Mostéfaoui–Moumen–Raynal: `BVal` messages build each
//! process's `bin_values`, one `Aux` per process reports a member of it,
//! and once `n-f` compatible `Aux` values are in, the common coin either
//! confirms a unanimous value (decide) or replaces the estimate. A process
//! that decides broadcasts `Term(v)`, which receivers count as `BVal(v)`
//! and `Aux(v)` in every round; `f+1` matching `Term`s are enough to
//! decide, so a decided process can stop participating.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coin::CommonCoin;
use crate::ids::{Membership, ProcessId};
use crate::step::Step;
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AbaMessage {
    BVal { round: u32, value: bool },
    Aux { round: u32, value: bool },
    Term { value: bool },
}

pub type AbaStep = Step<AbaMessage, bool>;

#[derive(Clone, Debug, Default)]
struct Round {
    bval: [BTreeSet<ProcessId>; 2],
    aux: [BTreeSet<ProcessId>; 2],
    bval_sent: [bool; 2],
    bin: [bool; 2],
    first_bin: Option<bool>,
    aux_sent: bool,
}

#[derive(Clone, Debug)]
pub struct Aba {
    m: Membership,
    coin_tag: Vec<u8>,
    coin: Arc<dyn CommonCoin>,
    proposed: bool,
    round: u32,
    est: bool,
    decision: Option<bool>,
    rounds: BTreeMap<u32, Round>,
    term: [BTreeSet<ProcessId>; 2],
}

impl Aba {
    pub fn new(m: Membership, coin_tag: Vec<u8>, coin: Arc<dyn CommonCoin>) -> Self {
        Aba {
            m,
            coin_tag,
            coin,
            proposed: false,
            round: 0,
            est: false,
            decision: None,
            rounds: BTreeMap::new(),
            term: Default::default(),
        }
    }

    pub fn decision(&self) -> Option<bool> {
        self.decision
    }

    pub fn has_proposed(&self) -> bool {
        self.proposed
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    /// Proposing after a decision (reached through `Term`s) is a no-op.
    pub fn propose(&mut self, value: bool) -> Result<AbaStep, Error> {
        if self.proposed {
            return Err(Error::AlreadyProposed);
        }
        self.proposed = true;
        let mut step = Step::default();
        if self.decision.is_some() {
            return Ok(step);
        }
        self.est = value;
        self.enter_round(1, &mut step);
        self.progress(&mut step);
        Ok(step)
    }

    pub fn handle(&mut self, from: ProcessId, msg: AbaMessage) -> AbaStep {
        let mut step = Step::default();
        if self.decision.is_some() || !self.m.contains(from) {
            return step;
        }
        match msg {
            AbaMessage::BVal { round, value } => {
                if round == 0 || !self.rounds.entry(round).or_default().bval[value as usize].insert(from) {
                    return step;
                }
                self.update(round, &mut step);
            }
            AbaMessage::Aux { round, value } => {
                if round == 0 {
                    return step;
                }
                // One Aux per sender per round.
                let aux = &mut self.rounds.entry(round).or_default().aux;
                if aux[!value as usize].contains(&from) || !aux[value as usize].insert(from) {
                    return step;
                }
            }
            AbaMessage::Term { value } => {
                if self.term[!value as usize].contains(&from) || !self.term[value as usize].insert(from) {
                    return step;
                }
                if self.term[value as usize].len() > self.m.f {
                    self.decide(value, &mut step);
                    return step;
                }
                let rounds: Vec<u32> = self.rounds.keys().copied().collect();
                for r in rounds {
                    self.update(r, &mut step);
                }
            }
        }
        self.progress(&mut step);
        step
    }

    fn count(&self, set: &BTreeSet<ProcessId>, value: bool) -> usize {
        set.union(&self.term[value as usize]).count()
    }

    fn enter_round(&mut self, r: u32, step: &mut AbaStep) {
        self.round = r;
        let est = self.est;
        let round = self.rounds.entry(r).or_default();
        round.bval_sent[est as usize] = true;
        step.broadcast(AbaMessage::BVal { round: r, value: est });
        self.update(r, step);
    }

    /// Applies the relay and `bin_values` rules for round `r`.
    fn update(&mut self, r: u32, step: &mut AbaStep) {
        let active = self.proposed && r <= self.round;
        self.rounds.entry(r).or_default();
        for b in [false, true] {
            let c = self.count(&self.rounds[&r].bval[b as usize], b);
            let round = self.rounds.get_mut(&r).unwrap();
            if active && c > self.m.f && !round.bval_sent[b as usize] {
                round.bval_sent[b as usize] = true;
                step.broadcast(AbaMessage::BVal { round: r, value: b });
            }
            if c > 2 * self.m.f && !round.bin[b as usize] {
                round.bin[b as usize] = true;
                round.first_bin.get_or_insert(b);
            }
        }
        let round = self.rounds.get_mut(&r).unwrap();
        if active && r == self.round && !round.aux_sent {
            if let Some(b) = round.first_bin {
                round.aux_sent = true;
                step.broadcast(AbaMessage::Aux { round: r, value: b });
            }
        }
    }

    fn vals(&self, r: u32) -> Option<[bool; 2]> {
        let round = self.rounds.get(&r)?;
        let quorum = self.m.n - self.m.f;
        let mut union = BTreeSet::new();
        for b in [true, false] {
            if !round.bin[b as usize] {
                continue;
            }
            let senders: BTreeSet<_> =
                round.aux[b as usize].union(&self.term[b as usize]).copied().collect();
            if senders.len() >= quorum {
                let mut v = [false; 2];
                v[b as usize] = true;
                return Some(v);
            }
            union.extend(senders);
        }
        (round.bin == [true, true] && union.len() >= quorum).then_some([true, true])
    }

    fn progress(&mut self, step: &mut AbaStep) {
        while self.proposed && self.decision.is_none() {
            let r = self.round;
            let Some(vals) = self.vals(r) else { break };
            let s = self.coin.flip(&self.coin_tag, r);
            if vals == [true, true] {
                self.est = s;
            } else {
                let b = vals[1];
                self.est = b;
                if b == s {
                    self.decide(b, step);
                    break;
                }
            }
            self.enter_round(r + 1, step);
        }
    }

    fn decide(&mut self, value: bool, step: &mut AbaStep) {
        if self.decision.is_none() {
            self.decision = Some(value);
            step.broadcast(AbaMessage::Term { value });
            step.output.push(value);
            // Round state is no longer needed.
            self.rounds.clear();
        }
    }

    pub fn footprint(&self) -> usize {
        let per_round: usize = self
            .rounds
            .values()
            .map(|r| 32 + 8 * (r.bval[0].len() + r.bval[1].len() + r.aux[0].len() + r.aux[1].len()))
            .sum();
        64 + self.coin_tag.len() + per_round + 8 * (self.term[0].len() + self.term[1].len())
    }
}
