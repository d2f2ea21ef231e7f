//! Message routing between the daemon and voter nodes.
//!
//! Nodes in the same process exchange envelopes over unbounded channels.
//! Nodes in other processes are reached over TCP: each direction of a link
//! is one connection carrying newline-delimited JSON [`Frame`]s. Senders
//! reconnect and retry until a frame is written, which matches the model's
//! reliable channels as long as the peer eventually comes back.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use privocracy_core::wire::{Destination, Endpoint, Envelope, TimerKey, WIRE_VERSION};
use privocracy_core::{ElectionId, Error, ProcessId};
use privocracy_crypto::Group;
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "frame", rename_all = "snake_case", bound = "")]
pub enum Frame<G: Group> {
    Protocol { from: Endpoint, to: Endpoint, env: Envelope<G> },
    /// A ballot submitted through the daemon's API for a remote voter.
    Vote { to: ProcessId, election: ElectionId, vote: bool },
}

pub type VoteReply = oneshot::Sender<Result<(), Error>>;

/// Inputs of a voter task.
#[derive(Debug)]
pub enum VoterInput<G: Group> {
    Net(Endpoint, Envelope<G>),
    Timer(TimerKey),
    Vote { election: ElectionId, vote: bool, reply: Option<VoteReply> },
}

#[derive(Clone)]
enum Local<G: Group> {
    Daemon(mpsc::UnboundedSender<(Endpoint, Envelope<G>)>),
    Voter(mpsc::UnboundedSender<VoterInput<G>>),
}

pub struct Router<G: Group> {
    n: usize,
    local: HashMap<Endpoint, Local<G>>,
    remote: HashMap<Endpoint, mpsc::UnboundedSender<Frame<G>>>,
}

impl<G: Group> Router<G> {
    pub fn new(n: usize) -> Self {
        Router { n, local: HashMap::new(), remote: HashMap::new() }
    }

    pub fn add_daemon(&mut self, tx: mpsc::UnboundedSender<(Endpoint, Envelope<G>)>) {
        self.local.insert(Endpoint::Daemon, Local::Daemon(tx));
    }

    pub fn add_voter(&mut self, p: ProcessId, tx: mpsc::UnboundedSender<VoterInput<G>>) {
        self.local.insert(Endpoint::Voter(p), Local::Voter(tx));
    }

    /// Routes `to` through a TCP link to `addr`. Must be called inside a
    /// Tokio runtime. Endpoints sharing an address share the link.
    pub fn add_remote(&mut self, to: Endpoint, addr: &str, links: &mut HashMap<String, mpsc::UnboundedSender<Frame<G>>>) {
        let tx = links
            .entry(addr.to_string())
            .or_insert_with(|| {
                let (tx, rx) = mpsc::unbounded_channel();
                tokio::spawn(peer_link(addr.to_string(), rx));
                tx
            })
            .clone();
        self.remote.insert(to, tx);
    }

    fn targets(&self, to: Destination) -> Vec<Endpoint> {
        match to {
            Destination::Daemon => vec![Endpoint::Daemon],
            Destination::Voter(p) => vec![Endpoint::Voter(p)],
            Destination::AllVoters => (1..=self.n as u32).map(|i| Endpoint::Voter(ProcessId(i))).collect(),
        }
    }

    pub fn send(&self, from: Endpoint, to: Destination, env: Envelope<G>) {
        for t in self.targets(to) {
            self.deliver(from, t, env.clone());
        }
    }

    fn deliver(&self, from: Endpoint, to: Endpoint, env: Envelope<G>) {
        if let Some(local) = self.local.get(&to) {
            // A closed channel means the node has shut down; like a crash.
            let _ = match local {
                Local::Daemon(tx) => tx.send((from, env)).map_err(drop),
                Local::Voter(tx) => tx.send(VoterInput::Net(from, env)).map_err(drop),
            };
        } else if let Some(link) = self.remote.get(&to) {
            let _ = link.send(Frame::Protocol { from, to, env });
        } else {
            tracing::warn!(?to, "no route");
        }
    }

    /// Hands a ballot to voter `p`. Local voters answer through `reply`;
    /// for remote ones the reply reports only that the ballot was sent.
    pub fn vote(&self, p: ProcessId, election: ElectionId, vote: bool, reply: VoteReply) {
        let to = Endpoint::Voter(p);
        if let Some(Local::Voter(tx)) = self.local.get(&to) {
            if let Err(mpsc::error::SendError(VoterInput::Vote { reply: Some(r), .. })) =
                tx.send(VoterInput::Vote { election, vote, reply: Some(reply) })
            {
                let _ = r.send(Err(Error::UnknownElection(election)));
            }
        } else if let Some(link) = self.remote.get(&to) {
            let sent = link.send(Frame::Vote { to: p, election, vote }).is_ok();
            let _ = reply.send(if sent { Ok(()) } else { Err(Error::UnknownElection(election)) });
        } else {
            let _ = reply.send(Err(Error::UnknownElection(election)));
        }
    }

    /// Delivers a frame that arrived over TCP to the local node it names.
    fn dispatch(&self, frame: Frame<G>) {
        match frame {
            Frame::Protocol { from, to, env } if self.local.contains_key(&to) => self.deliver(from, to, env),
            Frame::Protocol { to, .. } => tracing::warn!(?to, "frame for a node not hosted here"),
            Frame::Vote { to, election, vote } => match self.local.get(&Endpoint::Voter(to)) {
                Some(Local::Voter(tx)) => {
                    let _ = tx.send(VoterInput::Vote { election, vote, reply: None });
                }
                _ => tracing::warn!(%to, "vote for a voter not hosted here"),
            },
        }
    }
}

const RETRY: Duration = Duration::from_millis(100);

async fn peer_link<G: Group>(addr: String, mut rx: mpsc::UnboundedReceiver<Frame<G>>) {
    let mut conn: Option<TcpStream> = None;
    while let Some(frame) = rx.recv().await {
        let mut line = serde_json::to_vec(&frame).expect("frames serialize");
        line.push(b'\n');
        loop {
            let stream = match &mut conn {
                Some(s) => s,
                None => match TcpStream::connect(&addr).await {
                    Ok(s) => {
                        let _ = s.set_nodelay(true);
                        conn.insert(s)
                    }
                    Err(e) => {
                        tracing::debug!(%addr, %e, "peer unreachable; retrying");
                        tokio::time::sleep(RETRY).await;
                        continue;
                    }
                },
            };
            if stream.write_all(&line).await.is_ok() {
                break;
            }
            conn = None;
        }
    }
}

/// Accepts peer connections and delivers their frames locally.
pub async fn serve_peers<G: Group>(listener: TcpListener, router: Arc<Router<G>>) {
    loop {
        let Ok((stream, peer)) = listener.accept().await else { continue };
        let router = router.clone();
        tokio::spawn(async move {
            let mut lines = BufReader::new(stream).lines();
            while let Ok(Some(line)) = lines.next_line().await {
                match serde_json::from_str::<Frame<G>>(&line) {
                    Ok(Frame::Protocol { env, .. }) if env.v != WIRE_VERSION => {
                        tracing::warn!(%peer, v = env.v, "unsupported wire version");
                    }
                    Ok(frame) => router.dispatch(frame),
                    Err(e) => tracing::warn!(%peer, %e, "malformed frame"),
                }
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use privocracy_core::wire::Body;
    use privocracy_core::Lane;
    use privocracy_crypto::Fast61;

    use super::*;

    #[tokio::test]
    async fn frames_cross_a_tcp_link() {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap().to_string();

        let (tx, mut rx) = mpsc::unbounded_channel();
        let mut far = Router::<Fast61>::new(2);
        far.add_voter(ProcessId(2), tx);
        tokio::spawn(serve_peers(listener, Arc::new(far)));

        let mut near = Router::<Fast61>::new(2);
        let mut links = HashMap::new();
        near.add_remote(Endpoint::Voter(ProcessId(2)), &addr, &mut links);
        let env = Envelope::new(ElectionId([7; 16]), Body::Ack { lane: Lane::Normal });
        near.send(Endpoint::Daemon, Destination::Voter(ProcessId(2)), env.clone());
        let (reply, answer) = oneshot::channel();
        near.vote(ProcessId(2), ElectionId([7; 16]), true, reply);
        assert!(answer.await.unwrap().is_ok());

        match rx.recv().await.unwrap() {
            VoterInput::Net(from, got) => assert_eq!((from, got), (Endpoint::Daemon, env)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(rx.recv().await.unwrap(), VoterInput::Vote { vote: true, reply: None, .. }));
    }
}
