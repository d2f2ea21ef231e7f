//! The voting engine: proposals, voters, daemon-side tallying, emergency
//! thresholds and delegation.

pub mod daemon;
pub mod delegation;
pub mod emergency;
pub mod proposal;
pub mod source;
pub mod store;
pub mod voter;

pub use daemon::{AuditResult, DaemonCore, DaemonEffects, DaemonEvent, DecisionMode, TallyDecision};
pub use delegation::{delegate_resolve, resolve_all, DelegationEdge, Resolution};
pub use emergency::{emergency_evaluate, emergency_threshold, EmergencyOutcome};
pub use proposal::{Proposal, Purpose};
pub use source::{DelegateOnTimeout, Interactive, Scripted, VoteIntent, VoteSource};
pub use store::{MemoryShareStore, ShareStore};
pub use voter::{VoterEffects, VoterEvent, VoterNode};
