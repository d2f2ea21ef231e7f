//! The message envelope shared by voters and the daemon.
//!
//! Frames are single-line JSON objects:
//!
//! ```text
//! {"v":1,"election":"<32 hex>","body":{"kind":"<kind>","payload":{...}}}
//! ```
//!
//! Cryptographic values inside payloads are hex strings of their canonical
//! byte encodings. A receiver rejects any frame whose `v` differs from
//! [`WIRE_VERSION`].

use std::time::Duration;

use privocracy_crypto::{Group, Share, VectorCommitment};
use serde::{Deserialize, Serialize};

use crate::aba::AbaMessage;
use crate::avss::AvssMessage;
use crate::brb::BrbMessage;
use crate::ids::{ElectionId, Lane, ProcessId};
use crate::voting::proposal::Proposal;
use crate::Error;

pub const WIRE_VERSION: u32 = 1;

/// A voter's weighted combination of the shares it accepted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PartialTallyMessage<G: Group> {
    pub lane: Lane,
    /// Evaluation of the tally polynomial at the sender's index.
    pub partial: Share<G>,
    pub commitment: VectorCommitment<G>,
    pub weight_sum: u64,
}

/// One entry of a voter's share log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LoggedShare<G: Group> {
    pub origin: ProcessId,
    pub share: Share<G>,
    pub commitment: VectorCommitment<G>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case", bound = "")]
pub enum Body<G: Group> {
    /// Reliable broadcast of `originator`'s IsBinary proof.
    Proof { originator: ProcessId, msg: BrbMessage },
    Avss { dealer: ProcessId, msg: AvssMessage<G> },
    Aba { lane: Lane, originator: ProcessId, msg: AbaMessage },
    Propose(Box<Proposal>),
    PartialTally(PartialTallyMessage<G>),
    Ack { lane: Lane },
    /// A voter reporting that it logged `origin`'s share.
    ShareReceipt { origin: ProcessId },
    /// Daemon to voters: the audit election in the envelope was approved;
    /// `evidence` lets each voter check that before disclosing.
    AuditRequest { op: ElectionId, evidence: Vec<PartialTallyMessage<G>> },
    AuditShares { op: ElectionId, entries: Vec<LoggedShare<G>> },
}

impl<G: Group> Body<G> {
    /// Coarse message class used for metrics.
    pub fn class(&self) -> &'static str {
        match self {
            Body::Proof { .. } => "brb",
            Body::Avss { .. } => "avss",
            Body::Aba { .. } => "aba",
            _ => "app",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Envelope<G: Group> {
    pub v: u32,
    pub election: ElectionId,
    pub body: Body<G>,
}

impl<G: Group> Envelope<G> {
    pub fn new(election: ElectionId, body: Body<G>) -> Self {
        Envelope { v: WIRE_VERSION, election, body }
    }

    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("envelopes always serialize")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, Error> {
        let env: Self = serde_json::from_slice(bytes).map_err(|e| Error::Wire(e.to_string()))?;
        if env.v != WIRE_VERSION {
            return Err(Error::Wire(format!("unsupported wire version {}", env.v)));
        }
        Ok(env)
    }
}

/// The two kinds of party in the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Daemon,
    Voter(ProcessId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Destination {
    Daemon,
    Voter(ProcessId),
    /// Every voter, including the sender if it is one.
    AllVoters,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimerKey {
    VoteWindow(ElectionId),
    /// A scripted vote after think time.
    CastVote(ElectionId, bool),
}

/// Everything a node asks its runtime to do after handling one input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Effects<G: Group, E> {
    pub messages: Vec<(Destination, Envelope<G>)>,
    pub timers: Vec<(TimerKey, Duration)>,
    pub events: Vec<E>,
}

impl<G: Group, E> Default for Effects<G, E> {
    fn default() -> Self {
        Effects { messages: Vec::new(), timers: Vec::new(), events: Vec::new() }
    }
}

impl<G: Group, E> Effects<G, E> {
    pub fn send(&mut self, to: Destination, election: ElectionId, body: Body<G>) {
        self.messages.push((to, Envelope::new(election, body)));
    }

    pub fn extend(&mut self, other: Self) {
        self.messages.extend(other.messages);
        self.timers.extend(other.timers);
        self.events.extend(other.events);
    }
}

#[cfg(test)]
mod tests {
    use privocracy_crypto::Tiny83;

    use super::*;

    #[test]
    fn frame_round_trip_and_version_check() {
        let env: Envelope<Tiny83> = Envelope::new(
            ElectionId([1; 16]),
            Body::Aba { lane: Lane::Normal, originator: ProcessId(3), msg: AbaMessage::Term { value: true } },
        );
        let bytes = env.encode();
        assert_eq!(
            String::from_utf8(bytes.clone()).unwrap(),
            r#"{"v":1,"election":"01010101010101010101010101010101","body":{"kind":"aba","payload":{"lane":"normal","originator":3,"msg":{"type":"term","value":true}}}}"#
        );
        assert_eq!(Envelope::<Tiny83>::decode(&bytes).unwrap(), env);
        let bumped = String::from_utf8(bytes).unwrap().replacen("\"v\":1", "\"v\":2", 1);
        assert!(Envelope::<Tiny83>::decode(bumped.as_bytes()).is_err());
    }
}
