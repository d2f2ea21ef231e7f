use std::time::Duration;

use crate::ids::ElectionId;
use crate::voting::proposal::Proposal;

/// What a voter does when a proposal arrives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VoteIntent {
    Cast(bool),
    /// Cast after a think time.
    After(Duration, bool),
    /// The vote arrives later through `submit_vote`, or never.
    Defer,
}

/// Where a voter's ballot comes from.
pub trait VoteSource: Send {
    fn on_propose(&mut self, election: ElectionId, proposal: &Proposal) -> VoteIntent;
}

/// Votes are submitted from outside, e.g. by a human through the UI.
#[derive(Clone, Copy, Debug, Default)]
pub struct Interactive;

impl VoteSource for Interactive {
    fn on_propose(&mut self, _: ElectionId, _: &Proposal) -> VoteIntent {
        VoteIntent::Defer
    }
}

/// Never votes; the voter's weight reaches the tally only through its
/// delegation edges once its ballot is rejected for timing out.
#[derive(Clone, Copy, Debug, Default)]
pub struct DelegateOnTimeout;

impl VoteSource for DelegateOnTimeout {
    fn on_propose(&mut self, _: ElectionId, _: &Proposal) -> VoteIntent {
        VoteIntent::Defer
    }
}

type Policy = Box<dyn FnMut(ElectionId, &Proposal) -> Option<bool> + Send>;

/// A programmatic policy, for simulations and tests.
pub struct Scripted {
    policy: Policy,
    think: Duration,
}

impl Scripted {
    pub fn new(policy: impl FnMut(ElectionId, &Proposal) -> Option<bool> + Send + 'static) -> Self {
        Scripted { policy: Box::new(policy), think: Duration::ZERO }
    }

    pub fn always(vote: bool) -> Self {
        Scripted::new(move |_, _| Some(vote))
    }

    pub fn with_think_time(mut self, think: Duration) -> Self {
        self.think = think;
        self
    }
}

impl VoteSource for Scripted {
    fn on_propose(&mut self, election: ElectionId, proposal: &Proposal) -> VoteIntent {
        match (self.policy)(election, proposal) {
            None => VoteIntent::Defer,
            Some(v) if self.think.is_zero() => VoteIntent::Cast(v),
            Some(v) => VoteIntent::After(self.think, v),
        }
    }
}
