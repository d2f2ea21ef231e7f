use std::time::Duration;

use privocracy_core::voting::{Interactive, Proposal, Purpose, Scripted, VoteIntent, VoteSource};
use privocracy_core::ElectionId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// How a simulated voter answers a proposal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Yes,
    No,
    /// Never votes; the voter's weight is left to delegation.
    Abstain,
    /// Votes `vote` after `ms` of think time.
    Think { ms: u64, vote: bool },
    /// A fair coin per election.
    Random,
}

impl Policy {
    /// The vote source for commands; audits are approved.
    pub fn source(&self, seed: u64) -> Box<dyn VoteSource> {
        Box::new(AuditAware::new(self.command_source(seed), Some(true)))
    }

    pub fn command_source(&self, seed: u64) -> Box<dyn VoteSource> {
        match *self {
            Policy::Yes => Box::new(Scripted::always(true)),
            Policy::No => Box::new(Scripted::always(false)),
            Policy::Abstain => Box::new(Interactive),
            Policy::Think { ms, vote } => Box::new(Scripted::always(vote).with_think_time(Duration::from_millis(ms))),
            Policy::Random => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                Box::new(Scripted::new(move |_, _| Some(rng.gen())))
            }
        }
    }

    /// The opposite vote, for an equivocator's second persona.
    pub fn inverted(&self) -> Policy {
        match *self {
            Policy::Yes => Policy::No,
            Policy::No | Policy::Abstain | Policy::Random => Policy::Yes,
            Policy::Think { ms, vote } => Policy::Think { ms, vote: !vote },
        }
    }
}

/// Answers audits with a fixed vote and everything else per `inner`.
pub struct AuditAware {
    inner: Box<dyn VoteSource>,
    audit: Option<bool>,
}

impl AuditAware {
    pub fn new(inner: Box<dyn VoteSource>, audit: Option<bool>) -> Self {
        AuditAware { inner, audit }
    }
}

impl VoteSource for AuditAware {
    fn on_propose(&mut self, election: ElectionId, p: &Proposal) -> VoteIntent {
        match (&p.purpose, self.audit) {
            (Purpose::Audit { .. }, Some(v)) => VoteIntent::Cast(v),
            (Purpose::Audit { .. }, None) => VoteIntent::Defer,
            _ => self.inner.on_propose(election, p),
        }
    }
}
