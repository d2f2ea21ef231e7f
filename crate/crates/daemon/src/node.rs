//! Hosting a voter node on the Tokio runtime.

use std::sync::Arc;

use privocracy_core::voting::{DelegateOnTimeout, Interactive, Scripted, VoteSource, VoterEffects, VoterEvent, VoterNode};
use privocracy_core::wire::{Body, Endpoint};
use privocracy_crypto::Group;
use tokio::sync::mpsc;

use crate::config::VotePolicy;
use crate::transport::{Router, VoterInput};

pub fn vote_source(policy: VotePolicy) -> Box<dyn VoteSource> {
    match policy {
        VotePolicy::Interactive => Box::new(Interactive),
        VotePolicy::Approve => Box::new(Scripted::always(true)),
        VotePolicy::Reject => Box::new(Scripted::always(false)),
        VotePolicy::Abstain => Box::new(DelegateOnTimeout),
    }
}

/// Runs `node` until its inbox closes. `tx` is the sending side of the same
/// inbox, used for timers.
pub async fn run_voter<G: Group>(
    mut node: VoterNode<G>,
    mut rx: mpsc::UnboundedReceiver<VoterInput<G>>,
    tx: mpsc::UnboundedSender<VoterInput<G>>,
    router: Arc<Router<G>>,
) {
    let me = node.id();
    while let Some(input) = rx.recv().await {
        let fx = match input {
            VoterInput::Net(from, env) => {
                if let (Endpoint::Daemon, Body::Ack { lane }) = (from, &env.body) {
                    tracing::info!(voter = %me, election = %env.election, ?lane, "ACK");
                }
                node.handle_message(from, env)
            }
            VoterInput::Timer(key) => node.handle_timer(key),
            VoterInput::Vote { election, vote, reply } => match node.submit_vote(election, vote) {
                Ok(fx) => {
                    if let Some(r) = reply {
                        let _ = r.send(Ok(()));
                    }
                    fx
                }
                Err(e) => {
                    tracing::info!(voter = %me, %election, %e, "ballot refused");
                    if let Some(r) = reply {
                        let _ = r.send(Err(e));
                    }
                    continue;
                }
            },
        };
        apply(me, fx, &tx, &router);
    }
}

fn apply<G: Group>(
    me: privocracy_core::ProcessId,
    fx: VoterEffects<G>,
    tx: &mpsc::UnboundedSender<VoterInput<G>>,
    router: &Router<G>,
) {
    for (to, env) in fx.messages {
        router.send(Endpoint::Voter(me), to, env);
    }
    for (key, after) in fx.timers {
        let tx = tx.clone();
        tokio::spawn(async move {
            tokio::time::sleep(after).await;
            let _ = tx.send(VoterInput::Timer(key));
        });
    }
    for e in fx.events {
        match e {
            VoterEvent::ProofRejected { election, origin } => {
                tracing::warn!(voter = %me, %election, %origin, "invalid ballot proof")
            }
            VoterEvent::AuditRefused { election, op } => tracing::warn!(voter = %me, %election, %op, "audit refused"),
            e => tracing::debug!(voter = %me, ?e),
        }
    }
}
