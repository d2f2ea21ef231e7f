//! The long-running coordination service.
//!
//! [`start`] loads nothing from the environment: callers hand it a parsed
//! [`DaemonConfig`](config::DaemonConfig), a data directory and a listen
//! address, and get back the bound addresses. The `privocracy-daemon`
//! binary wires that to flags and environment variables; tests call it
//! directly.

pub mod api;
pub mod config;
pub mod exec;
pub mod log;
pub mod node;
pub mod service;
pub mod transport;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use privocracy_core::coin::SharedSeedCoin;
use privocracy_core::voting::VoterNode;
use privocracy_core::wire::Endpoint;
use privocracy_core::{Membership, ProcessId};
use privocracy_crypto::{Fast61, Group, Ristretto255, Sound16, Tiny83};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use crate::config::{ConfigError, ConfigResolver, DaemonConfig, FileResolver, GroupName, HookResolver};
use crate::exec::{Executor, ShimExecutor};
use crate::log::{CommandLog, LogError};
use crate::service::Service;
use crate::transport::{serve_peers, Router};

pub const LOG_FILE: &str = "command.log";

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

pub struct DaemonOptions {
    pub config: DaemonConfig,
    /// Holds the command log. `None` keeps the log in memory.
    pub data_dir: Option<PathBuf>,
    pub listen: String,
    pub executor: Box<dyn Executor>,
    /// Seeds election ids and voter randomness; random when `None`.
    pub seed: Option<u64>,
}

impl DaemonOptions {
    pub fn new(config: DaemonConfig) -> Self {
        DaemonOptions {
            config,
            data_dir: None,
            listen: "127.0.0.1:0".into(),
            executor: Box::new(ShimExecutor),
            seed: None,
        }
    }
}

/// A started daemon. Its tasks live on the runtime that ran [`start`].
pub struct Running {
    pub http_addr: SocketAddr,
    pub peer_addr: Option<SocketAddr>,
    pub server: JoinHandle<std::io::Result<()>>,
}

async fn bind(addr: &str) -> Result<TcpListener, StartError> {
    TcpListener::bind(addr).await.map_err(|source| StartError::Bind { addr: addr.into(), source })
}

pub async fn start(opts: DaemonOptions) -> Result<Running, StartError> {
    match opts.config.group {
        GroupName::Tiny83 => start_in::<Tiny83>(opts).await,
        GroupName::Sound16 => start_in::<Sound16>(opts).await,
        GroupName::Fast61 => start_in::<Fast61>(opts).await,
        GroupName::Ristretto255 => start_in::<Ristretto255>(opts).await,
    }
}

async fn start_in<G: Group>(opts: DaemonOptions) -> Result<Running, StartError> {
    let cfg = opts.config;
    cfg.check()?;
    let files = FileResolver::new::<G>(&cfg)?;
    let resolver: Box<dyn ConfigResolver> = match &cfg.resolver {
        Some(program) => Box::new(HookResolver::new(program.clone(), cfg.clone(), files)?),
        None => Box::new(files),
    };
    let log = match &opts.data_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            CommandLog::open(&dir.join(LOG_FILE))?
        }
        None => CommandLog::in_memory(),
    };
    let seed = opts.seed.unwrap_or_else(rand::random);
    let (n, f) = (cfg.n(), cfg.fault_budget());

    let http = bind(&opts.listen).await?;
    let peers = match &cfg.peer_address {
        Some(a) => Some(bind(a).await?),
        None => None,
    };

    let mut router = Router::<G>::new(n);
    let (net_tx, net_rx) = mpsc::unbounded_channel();
    router.add_daemon(net_tx);
    let mut links = HashMap::new();
    let mut embedded = Vec::new();
    for (i, v) in cfg.voters.iter().enumerate() {
        let p = ProcessId(i as u32 + 1);
        match &v.address {
            Some(addr) => router.add_remote(Endpoint::Voter(p), addr, &mut links),
            None => {
                let (tx, rx) = mpsc::unbounded_channel();
                router.add_voter(p, tx.clone());
                embedded.push((p, v.policy, tx, rx));
            }
        }
    }
    let router = Arc::new(router);
    let peer_addr = match peers {
        Some(l) => {
            let addr = l.local_addr()?;
            tokio::spawn(serve_peers(l, router.clone()));
            Some(addr)
        }
        None => None,
    };

    let coin = Arc::new(SharedSeedCoin::from_u64(cfg.coin_seed));
    for (p, policy, tx, rx) in embedded {
        let node = VoterNode::<G>::new(Membership::new(n, f, p), coin.clone(), seed, node::vote_source(policy));
        tokio::spawn(node::run_voter(node, rx, tx, router.clone()));
    }

    let (api_tx, api_rx) = mpsc::unbounded_channel();
    let service = Service::<G>::new(cfg, seed, log, resolver, opts.executor, router)?;
    tokio::spawn(service.run(api_rx, net_rx));

    let http_addr = http.local_addr()?;
    let app = api::router(api::Handle::new(api_tx));
    let server = tokio::spawn(async move { axum::serve(http, app).await });
    tracing::info!(%http_addr, ?peer_addr, group = G::NAME, n, f, "daemon started");
    Ok(Running { http_addr, peer_addr, server })
}

/// Runs voter `name` of `cfg` in this process, listening on its configured
/// address unless `listen` overrides it. Returns when the listener fails.
pub async fn run_voter_process(cfg: DaemonConfig, name: &str, listen: Option<String>, seed: Option<u64>) -> Result<(), StartError> {
    match cfg.group {
        GroupName::Tiny83 => voter_in::<Tiny83>(cfg, name, listen, seed).await,
        GroupName::Sound16 => voter_in::<Sound16>(cfg, name, listen, seed).await,
        GroupName::Fast61 => voter_in::<Fast61>(cfg, name, listen, seed).await,
        GroupName::Ristretto255 => voter_in::<Ristretto255>(cfg, name, listen, seed).await,
    }
}

async fn voter_in<G: Group>(cfg: DaemonConfig, name: &str, listen: Option<String>, seed: Option<u64>) -> Result<(), StartError> {
    cfg.check()?;
    let me = cfg.voter_id(name).ok_or_else(|| ConfigError::Invalid(format!("unknown voter {name:?}")))?;
    let entry = &cfg.voters[me.0 as usize - 1];
    let addr = listen
        .or_else(|| entry.address.clone())
        .ok_or_else(|| ConfigError::Invalid(format!("voter {name:?} has no address")))?;
    let daemon = cfg.peer_address.clone().ok_or_else(|| ConfigError::Invalid("peer_address is not set".into()))?;
    let listener = bind(&addr).await?;
    let (n, f) = (cfg.n(), cfg.fault_budget());

    let mut router = Router::<G>::new(n);
    let mut links = HashMap::new();
    let (tx, rx) = mpsc::unbounded_channel();
    router.add_voter(me, tx.clone());
    router.add_remote(Endpoint::Daemon, &daemon, &mut links);
    for (i, v) in cfg.voters.iter().enumerate() {
        let p = ProcessId(i as u32 + 1);
        if p != me {
            router.add_remote(Endpoint::Voter(p), v.address.as_deref().unwrap_or(&daemon), &mut links);
        }
    }
    let router = Arc::new(router);
    let coin = Arc::new(SharedSeedCoin::from_u64(cfg.coin_seed));
    let seed = seed.unwrap_or_else(rand::random);
    let node = VoterNode::<G>::new(Membership::new(n, f, me), coin, seed, node::vote_source(entry.policy));
    tokio::spawn(node::run_voter(node, rx, tx, router.clone()));
    tracing::info!(voter = name, %addr, "voter started");
    serve_peers(listener, router).await;
    Ok(())
}
