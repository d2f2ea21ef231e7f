//! Asynchronous Byzantine fault-tolerant primitives (reliable broadcast,
//! binary agreement, verifiable secret sharing) and the weighted private
//! voting engine built on them.
//!
//! Everything here is a deterministic state machine: inputs are messages
//! and timer expirations, outputs are [`Effects`](wire::Effects). Runtimes
//! (the simulator and the daemon service) own time and transport.

pub mod aba;
pub mod avss;
pub mod brb;
pub mod coin;
pub mod ids;
pub mod leakage;
pub mod rational;
pub mod step;
pub mod voting;
pub mod wire;

pub use ids::{ElectionId, InstanceTag, Lane, Membership, PrimitiveKind, ProcessId};
pub use rational::Fraction;

use privocracy_crypto::CryptoError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("only the originator may broadcast")]
    NotOriginator,
    #[error("value already broadcast")]
    DuplicateBroadcast,
    #[error("already proposed in this agreement")]
    AlreadyProposed,
    #[error("already voted in this election")]
    AlreadyVoted,
    #[error("unknown election {0}")]
    UnknownElection(ElectionId),
    #[error("accepted weight has not reached the emergency frontier")]
    FrontierNotReached,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed frame: {0}")]
    Wire(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}
