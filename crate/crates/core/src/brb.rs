//! Bracha's Byzantine reliable broadcast.
//!
//! The originator sends `Send(v)`. Every process echoes the first `Send`
//! it sees from the originator, sends `Ready(v)` after `ceil((n+f+1)/2)`
//! matching echoes or `f+1` matching readies, and delivers after `2f+1`
//! matching readies. Only the first echo and first ready from each sender
//! are counted.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ids::{Membership, ProcessId};
use crate::step::Step;
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum BrbMessage {
    Send(#[serde(with = "hex::serde")] Vec<u8>),
    Echo(#[serde(with = "hex::serde")] Vec<u8>),
    Ready(#[serde(with = "hex::serde")] Vec<u8>),
}

impl BrbMessage {
    pub fn value(&self) -> &[u8] {
        match self {
            BrbMessage::Send(v) | BrbMessage::Echo(v) | BrbMessage::Ready(v) => v,
        }
    }
}

pub type BrbStep = Step<BrbMessage, Vec<u8>>;

type Digest32 = [u8; 32];

#[derive(Clone, Debug, Default)]
struct Tally {
    senders: BTreeSet<ProcessId>,
    counts: BTreeMap<Digest32, (Vec<u8>, usize)>,
}

impl Tally {
    /// Records `from`'s vote for `value`; returns the new count, or `None`
    /// if `from` already voted.
    fn add(&mut self, from: ProcessId, value: &[u8]) -> Option<usize> {
        if !self.senders.insert(from) {
            return None;
        }
        let d: Digest32 = Sha256::digest(value).into();
        let e = self.counts.entry(d).or_insert_with(|| (value.to_vec(), 0));
        e.1 += 1;
        Some(e.1)
    }

    fn footprint(&self) -> usize {
        self.senders.len() * 8 + self.counts.values().map(|(v, _)| v.len() + 48).sum::<usize>()
    }
}

#[derive(Clone, Debug)]
pub struct Brb {
    m: Membership,
    originator: ProcessId,
    broadcast: bool,
    got_send: bool,
    echoed: bool,
    readied: bool,
    delivered: Option<Vec<u8>>,
    echoes: Tally,
    readies: Tally,
}

impl Brb {
    pub fn new(m: Membership, originator: ProcessId) -> Self {
        Brb {
            m,
            originator,
            broadcast: false,
            got_send: false,
            echoed: false,
            readied: false,
            delivered: None,
            echoes: Tally::default(),
            readies: Tally::default(),
        }
    }

    pub fn originator(&self) -> ProcessId {
        self.originator
    }

    pub fn delivered(&self) -> Option<&[u8]> {
        self.delivered.as_deref()
    }

    pub fn broadcast(&mut self, value: Vec<u8>) -> Result<BrbStep, Error> {
        if self.m.me != self.originator {
            return Err(Error::NotOriginator);
        }
        if self.broadcast {
            return Err(Error::DuplicateBroadcast);
        }
        self.broadcast = true;
        let mut step = Step::default();
        step.broadcast(BrbMessage::Send(value));
        Ok(step)
    }

    pub fn handle(&mut self, from: ProcessId, msg: BrbMessage) -> BrbStep {
        let mut step = Step::default();
        if !self.m.contains(from) {
            return step;
        }
        match msg {
            BrbMessage::Send(v) => {
                if from == self.originator && !self.got_send {
                    self.got_send = true;
                    if !self.echoed {
                        self.echoed = true;
                        step.broadcast(BrbMessage::Echo(v));
                    }
                }
            }
            BrbMessage::Echo(v) => {
                if let Some(c) = self.echoes.add(from, &v) {
                    if c >= self.m.echo_quorum() {
                        self.ready(v, &mut step);
                    }
                }
            }
            BrbMessage::Ready(v) => {
                if let Some(c) = self.readies.add(from, &v) {
                    if c > self.m.f {
                        self.ready(v.clone(), &mut step);
                    }
                    if c > 2 * self.m.f && self.delivered.is_none() {
                        self.delivered = Some(v.clone());
                        step.output.push(v);
                    }
                }
            }
        }
        step
    }

    fn ready(&mut self, v: Vec<u8>, step: &mut BrbStep) {
        if !self.readied {
            self.readied = true;
            step.broadcast(BrbMessage::Ready(v));
        }
    }

    /// Approximate bytes of state held by this instance.
    pub fn footprint(&self) -> usize {
        64 + self.echoes.footprint()
            + self.readies.footprint()
            + self.delivered.as_ref().map_or(0, Vec::len)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;

    use super::*;
    use crate::step::Target;

    fn run(n: usize, f: usize, value: &[u8]) -> Vec<Option<Vec<u8>>> {
        let mut nodes: Vec<Brb> = (1..=n as u32)
            .map(|i| Brb::new(Membership::new(n, f, ProcessId(i)), ProcessId(1)))
            .collect();
        let mut queue = VecDeque::new();
        let step = nodes[0].broadcast(value.to_vec()).unwrap();
        queue.extend(step.messages.into_iter().map(|m| (ProcessId(1), m)));
        while let Some((from, m)) = queue.pop_front() {
            let targets: Vec<u32> = match m.target {
                Target::All => (1..=n as u32).collect(),
                Target::Node(p) => vec![p.0],
            };
            for t in targets {
                let s = nodes[t as usize - 1].handle(from, m.message.clone());
                queue.extend(s.messages.into_iter().map(|x| (ProcessId(t), x)));
            }
        }
        nodes.iter().map(|b| b.delivered().map(|v| v.to_vec())).collect()
    }

    #[test]
    fn all_deliver_in_a_fault_free_run() {
        for (n, f) in [(4, 1), (7, 2), (10, 3)] {
            assert!(run(n, f, b"hello").iter().all(|d| d.as_deref() == Some(&b"hello"[..])));
        }
    }

    #[test]
    fn only_originator_broadcasts_once() {
        let mut b = Brb::new(Membership::new(4, 1, ProcessId(2)), ProcessId(1));
        assert_eq!(b.broadcast(vec![1]), Err(Error::NotOriginator));
        let mut b = Brb::new(Membership::new(4, 1, ProcessId(1)), ProcessId(1));
        b.broadcast(vec![1]).unwrap();
        assert_eq!(b.broadcast(vec![1]), Err(Error::DuplicateBroadcast));
    }

    #[test]
    fn duplicate_votes_are_ignored() {
        let mut b = Brb::new(Membership::new(4, 1, ProcessId(2)), ProcessId(1));
        for _ in 0..5 {
            assert!(b.handle(ProcessId(3), BrbMessage::Ready(vec![7])).is_empty());
        }
        let s = b.handle(ProcessId(4), BrbMessage::Ready(vec![7]));
        assert_eq!(s.messages.len(), 1);
        assert!(s.output.is_empty());
        let s = b.handle(ProcessId(1), BrbMessage::Ready(vec![7]));
        assert_eq!(s.output, vec![vec![7]]);
    }

    #[test]
    fn send_from_non_originator_is_ignored() {
        let mut b = Brb::new(Membership::new(4, 1, ProcessId(2)), ProcessId(1));
        assert!(b.handle(ProcessId(3), BrbMessage::Send(vec![1])).is_empty());
        assert!(b.handle(ProcessId(9), BrbMessage::Echo(vec![1])).is_empty());
    }
}
