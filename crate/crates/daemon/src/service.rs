//! The daemon's single logical owner of election state.
//!
//! One task owns the [`DaemonCore`], the command log, the resolver and the
//! executor. HTTP handlers and voter traffic reach it through channels, so
//! per-election state is serialized without locks. Tally interpolation
//! stays inside the core: views and log entries carry only the approval
//! bit and the decision mode.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use privocracy_core::voting::{
    emergency_threshold, DaemonCore, DaemonEffects, DaemonEvent, DecisionMode, DelegationEdge, Proposal,
};
use privocracy_core::wire::{Endpoint, Envelope};
use privocracy_core::{ElectionId, Error as CoreError, ProcessId};
use privocracy_crypto::Group;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{mpsc, oneshot};

use crate::config::{ConfigError, ConfigResolver, DaemonConfig, ElectionConfig, VotePolicy};
use crate::exec::{ExecutionRecord, Executor};
use crate::log::{now_ms, CommandLog, EntryKind, LogEntry};
use crate::transport::Router;

/// Timeout for audits whose issuer and command match no rule.
pub const DEFAULT_AUDIT_TIMEOUT_MS: u64 = 300_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unavailable(String),
}

pub type Reply<T> = oneshot::Sender<Result<T, ApiError>>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub to: String,
    pub trust: u64,
}

/// What an election was issued for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ElectionKind {
    Command,
    Audit { op: ElectionId },
    /// Replaces `voter`'s outgoing delegation edges once approved.
    Delegation { voter: String, edges: Vec<EdgeSpec> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionView {
    pub approved: bool,
    pub mode: DecisionMode,
}

/// Progress of an emergency election towards the early frontier, from
/// the voters' share receipts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Frontier {
    pub receipted_weight: u64,
    pub required_weight: f64,
    pub reached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ElectionView {
    pub election_id: ElectionId,
    pub issuer: String,
    pub command: String,
    pub kind: ElectionKind,
    /// `normal` or `emergency`.
    pub mode: String,
    /// `pending` or `decided`.
    pub status: String,
    pub decision: Option<DecisionView>,
    pub execution: Option<ExecutionRecord>,
    pub weights: BTreeMap<String, u64>,
    pub threshold: String,
    pub created_ms: u64,
    pub timeout_ms: u64,
    pub remaining_ms: u64,
    pub frontier: Option<Frontier>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditView {
    pub election_id: ElectionId,
    pub op: ElectionId,
    /// `pending`, `rejected`, `disclosing` or `complete`.
    pub status: String,
    /// Revealed ballot per voter: `approve`, `reject`, or `invalid(<v>)`
    /// for a value that bypassed the binary proof.
    pub votes: BTreeMap<String, String>,
    pub responders: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DelegationView {
    pub voter_id: String,
    /// Edges set by an approved delegation election, if any.
    pub edges: Option<Vec<EdgeSpec>>,
    /// Edges from the config file, per rule.
    pub configured: Vec<Vec<EdgeSpec>>,
    /// Delegation elections for this voter still being voted on.
    pub pending: Vec<ElectionId>,
}

pub enum Request {
    Issue { issuer: String, command: String, emergency: bool, reply: Reply<ElectionId> },
    Election { id: ElectionId, reply: Reply<ElectionView> },
    List { pending_for: Option<String>, reply: Reply<Vec<ElectionView>> },
    Vote { id: ElectionId, voter: String, vote: bool, reply: Reply<()> },
    GetDelegations { voter: String, reply: Reply<DelegationView> },
    PutDelegations { voter: String, edges: Vec<EdgeSpec>, reply: Reply<ElectionId> },
    Audit { op: ElectionId, issuer: String, reply: Reply<ElectionId> },
    AuditView { id: ElectionId, reply: Reply<AuditView> },
    Log { after: u64, election: Option<ElectionId>, reply: Reply<Vec<LogEntry>> },
}

#[derive(Serialize, Deserialize)]
struct RequestPayload {
    issuer: String,
    command: String,
    emergency: bool,
    kind: ElectionKind,
    proposal: Proposal,
}

struct Meta {
    issuer: String,
    command: String,
    kind: ElectionKind,
    proposal: Proposal,
    created: u64,
    decision: Option<DecisionView>,
    execution: Option<ExecutionRecord>,
    audit: Option<AuditView>,
    /// Ballots relayed through the API.
    voted: BTreeSet<ProcessId>,
}

pub struct Service<G: Group> {
    cfg: DaemonConfig,
    rules: Vec<ElectionConfig>,
    core: DaemonCore<G>,
    log: CommandLog,
    resolver: Box<dyn ConfigResolver>,
    executor: Box<dyn Executor>,
    router: Arc<Router<G>>,
    elections: BTreeMap<ElectionId, Meta>,
    overrides: BTreeMap<ProcessId, Vec<DelegationEdge>>,
}

fn bad(msg: impl Into<String>) -> ApiError {
    ApiError::BadRequest(msg.into())
}

impl<G: Group> Service<G> {
    pub fn new(
        cfg: DaemonConfig,
        seed: u64,
        log: CommandLog,
        resolver: Box<dyn ConfigResolver>,
        executor: Box<dyn Executor>,
        router: Arc<Router<G>>,
    ) -> Result<Self, ConfigError> {
        let rules = cfg.elections.iter().map(|r| cfg.compile(r)).collect::<Result<_, _>>()?;
        let core = DaemonCore::new(cfg.n(), cfg.fault_budget(), seed);
        Ok(Service {
            cfg,
            rules,
            core,
            log,
            resolver,
            executor,
            router,
            elections: BTreeMap::new(),
            overrides: BTreeMap::new(),
        })
    }

    /// Serves requests and voter traffic until both channels close.
    pub async fn run(
        mut self,
        mut api: mpsc::UnboundedReceiver<Request>,
        mut net: mpsc::UnboundedReceiver<(Endpoint, Envelope<G>)>,
    ) {
        self.recover();
        loop {
            tokio::select! {
                Some(req) = api.recv() => self.on_request(req),
                Some((from, env)) = net.recv() => {
                    let fx = self.core.handle(from, env);
                    self.apply(fx);
                }
                else => break,
            }
        }
    }

    /// Rebuilds state from the log. Elections without a DECISION are
    /// proposed again under their old id; voters that already sent partial
    /// tallies answer with them, so a recovered decision always matches
    /// the voters' tallies.
    fn recover(&mut self) {
        let entries = self.log.entries().to_vec();
        for e in &entries {
            match e.kind {
                EntryKind::Request => match serde_json::from_value::<RequestPayload>(e.payload.clone()) {
                    Ok(p) => {
                        self.elections.insert(
                            e.election,
                            Meta {
                                issuer: p.issuer,
                                command: p.command,
                                kind: p.kind,
                                proposal: p.proposal,
                                created: e.timestamp,
                                decision: None,
                                execution: None,
                                audit: None,
                                voted: BTreeSet::new(),
                            },
                        );
                    }
                    Err(err) => tracing::error!(seq = e.seq, %err, "unreadable REQUEST entry"),
                },
                EntryKind::Decision => {
                    let Ok(d) = serde_json::from_value::<DecisionView>(e.payload.clone()) else { continue };
                    if let Some(m) = self.elections.get_mut(&e.election) {
                        m.decision = Some(d);
                        if let (true, ElectionKind::Delegation { voter, edges }) = (d.approved, m.kind.clone()) {
                            self.set_override(&voter, &edges);
                        }
                    }
                }
                EntryKind::Execution => {
                    if let (Some(m), Ok(r)) = (self.elections.get_mut(&e.election), serde_json::from_value(e.payload.clone())) {
                        m.execution = Some(r);
                    }
                }
                EntryKind::Audit => {
                    if let (Some(m), Ok(v)) =
                        (self.elections.get_mut(&e.election), serde_json::from_value::<AuditView>(e.payload.clone()))
                    {
                        m.audit = Some(v);
                    }
                }
                EntryKind::ShareReceipt | EntryKind::PartialTally => {}
            }
        }
        let unfinished: Vec<_> =
            self.elections.iter().filter(|(_, m)| m.decision.is_none()).map(|(id, m)| (*id, m.proposal.clone())).collect();
        for (id, proposal) in unfinished {
            tracing::info!(%id, "re-proposing unfinished election");
            match self.core.issue_with_id(id, proposal) {
                Ok(fx) => self.apply(fx),
                Err(err) => tracing::error!(%id, %err, "cannot resume election"),
            }
        }
    }

    fn on_request(&mut self, req: Request) {
        match req {
            Request::Issue { issuer, command, emergency, reply } => {
                let _ = reply.send(self.issue(&issuer, &command, emergency, ElectionKind::Command));
            }
            Request::Election { id, reply } => {
                let _ = reply.send(self.view(id).ok_or_else(|| ApiError::NotFound(format!("unknown election {id}"))));
            }
            Request::List { pending_for, reply } => {
                let _ = reply.send(self.list(pending_for.as_deref()));
            }
            Request::Vote { id, voter, vote, reply } => self.vote(id, &voter, vote, reply),
            Request::GetDelegations { voter, reply } => {
                let _ = reply.send(self.delegations(&voter));
            }
            Request::PutDelegations { voter, edges, reply } => {
                let _ = reply.send(self.put_delegations(&voter, edges));
            }
            Request::Audit { op, issuer, reply } => {
                let _ = reply.send(self.audit(op, &issuer));
            }
            Request::AuditView { id, reply } => {
                let _ = reply.send(self.audit_view(id));
            }
            Request::Log { after, election, reply } => {
                let _ = reply.send(Ok(self.log.read(after, election)));
            }
        }
    }

    fn voter(&self, name: &str) -> Result<ProcessId, ApiError> {
        self.cfg
            .voter_id(name)
            .or_else(|| name.parse::<u32>().ok().filter(|i| (1..=self.cfg.n() as u32).contains(i)).map(ProcessId))
            .ok_or_else(|| ApiError::NotFound(format!("unknown voter {name:?}")))
    }

    fn name(&self, p: ProcessId) -> String {
        self.cfg.voter_name(p).to_string()
    }

    fn issue(&mut self, issuer: &str, command: &str, emergency: bool, kind: ElectionKind) -> Result<ElectionId, ApiError> {
        if self.log.halted() {
            return Err(ApiError::Unavailable("command log unavailable; not accepting elections".into()));
        }
        if issuer.trim().is_empty() || command.trim().is_empty() {
            return Err(bad("issuer and command must be non-empty"));
        }
        let proposal = match &kind {
            ElectionKind::Audit { op } => {
                let timeout = self.resolver.resolve(issuer, command).map_or(DEFAULT_AUDIT_TIMEOUT_MS, |c| c.timeout_ms);
                self.core.audit_proposal(issuer, *op, timeout)
            }
            _ => {
                let c = self.resolver.resolve(issuer, command).map_err(|e| bad(e.to_string()))?;
                let mut p = c.proposal(issuer, command, emergency);
                p.delegation.retain(|e| !self.overrides.contains_key(&e.from));
                p.delegation.extend(self.overrides.values().flatten().copied());
                p
            }
        };
        let (id, fx) = self.core.issue(proposal.clone()).map_err(|e| bad(e.to_string()))?;
        let payload = RequestPayload {
            issuer: issuer.into(),
            command: command.into(),
            emergency: proposal.emergency,
            kind: kind.clone(),
            proposal: proposal.clone(),
        };
        let payload = serde_json::to_value(payload).expect("payload serializes");
        if let Err(e) = self.log.append(EntryKind::Request, id, payload) {
            // Never proposed, so it can never decide.
            return Err(ApiError::Unavailable(e.to_string()));
        }
        self.elections.insert(
            id,
            Meta {
                issuer: issuer.into(),
                command: command.into(),
                kind,
                proposal,
                created: now_ms(),
                decision: None,
                execution: None,
                audit: None,
                voted: BTreeSet::new(),
            },
        );
        tracing::info!(%id, issuer, command, "election issued");
        self.apply(fx);
        Ok(id)
    }

    fn append(&mut self, kind: EntryKind, id: ElectionId, payload: Value) {
        if let Err(e) = self.log.append(kind, id, payload) {
            tracing::error!(%id, ?kind, %e, "log append failed");
        }
    }

    fn apply(&mut self, fx: DaemonEffects<G>) {
        for (to, env) in fx.messages {
            self.router.send(Endpoint::Daemon, to, env);
        }
        for e in fx.events {
            self.on_event(e);
        }
    }

    fn on_event(&mut self, e: DaemonEvent) {
        match e {
            DaemonEvent::ShareReceipt { election, from, origin } => {
                let payload = json!({ "voter": self.name(from), "origin": self.name(origin) });
                self.append(EntryKind::ShareReceipt, election, payload);
            }
            DaemonEvent::PartialTallyReceived { election, lane, from } => {
                let payload = json!({ "voter": self.name(from), "lane": lane });
                self.append(EntryKind::PartialTally, election, payload);
            }
            DaemonEvent::PartialTallyRejected { election, lane, from, reason } => {
                tracing::warn!(%election, ?lane, %from, reason, "partial tally rejected");
            }
            DaemonEvent::EarlyUndecided { election, .. } => {
                tracing::info!(%election, "early lane undecided; waiting for the late lane");
            }
            DaemonEvent::Decided(d) => self.on_decided(d.election, DecisionView { approved: d.approved, mode: d.mode }),
            DaemonEvent::AuditRequested { election, op } => {
                let view = AuditView {
                    election_id: election,
                    op,
                    status: "disclosing".into(),
                    votes: BTreeMap::new(),
                    responders: 0,
                };
                self.record_audit(election, view);
            }
            DaemonEvent::AuditCompleted { election, result } => {
                let votes = result
                    .votes
                    .iter()
                    .map(|(p, v)| {
                        let shown = match v {
                            0 => "reject".to_string(),
                            1 => "approve".to_string(),
                            v => format!("invalid({v})"),
                        };
                        (self.name(*p), shown)
                    })
                    .collect();
                let view = AuditView {
                    election_id: election,
                    op: result.op,
                    status: "complete".into(),
                    votes,
                    responders: result.responders,
                };
                self.record_audit(election, view);
            }
        }
    }

    fn record_audit(&mut self, id: ElectionId, view: AuditView) {
        self.append(EntryKind::Audit, id, serde_json::to_value(&view).expect("audit view serializes"));
        if let Some(m) = self.elections.get_mut(&id) {
            m.audit = Some(view);
        }
    }

    fn on_decided(&mut self, id: ElectionId, d: DecisionView) {
        let Some(m) = self.elections.get_mut(&id) else { return };
        if m.decision.is_some() {
            return;
        }
        m.decision = Some(d);
        let (issuer, command, kind) = (m.issuer.clone(), m.command.clone(), m.kind.clone());
        tracing::info!(%id, approved = d.approved, mode = ?d.mode, "decided");
        self.append(EntryKind::Decision, id, serde_json::to_value(d).expect("decision serializes"));
        if !d.approved {
            return;
        }
        match kind {
            ElectionKind::Command => {
                let record = self.executor.execute(id, &issuer, &command);
                self.append(EntryKind::Execution, id, serde_json::to_value(&record).expect("record serializes"));
                if let Some(m) = self.elections.get_mut(&id) {
                    m.execution = Some(record);
                }
            }
            ElectionKind::Delegation { voter, edges } => self.set_override(&voter, &edges),
            ElectionKind::Audit { .. } => {}
        }
    }

    fn set_override(&mut self, voter: &str, edges: &[EdgeSpec]) {
        let Some(from) = self.cfg.voter_id(voter) else { return };
        let edges = edges
            .iter()
            .filter_map(|e| Some(DelegationEdge { from, to: self.cfg.voter_id(&e.to)?, trust: e.trust }))
            .collect();
        self.overrides.insert(from, edges);
    }

    fn view(&self, id: ElectionId) -> Option<ElectionView> {
        let m = self.elections.get(&id)?;
        let p = &m.proposal;
        let weights = p.weights.iter().enumerate().map(|(i, w)| (self.name(ProcessId(i as u32 + 1)), *w)).collect();
        let elapsed = now_ms().saturating_sub(m.created);
        let frontier = p.emergency.then(|| {
            let total = p.total_weight();
            let t_e = emergency_threshold(p.threshold).expect("validated threshold");
            let receipted_weight = (1..=self.cfg.n() as u32)
                .map(|i| self.core.receipts(id, ProcessId(i)).iter().map(|o| p.weight(*o)).sum::<u64>())
                .max()
                .unwrap_or(0);
            Frontier {
                receipted_weight,
                required_weight: t_e.to_f64() * total as f64,
                reached: t_e.met_by(receipted_weight, total),
            }
        });
        Some(ElectionView {
            election_id: id,
            issuer: m.issuer.clone(),
            command: m.command.clone(),
            kind: m.kind.clone(),
            mode: if p.emergency { "emergency" } else { "normal" }.into(),
            status: if m.decision.is_some() { "decided" } else { "pending" }.into(),
            decision: m.decision,
            execution: m.execution.clone(),
            weights,
            threshold: p.threshold.to_string(),
            created_ms: m.created,
            timeout_ms: p.timeout_ms,
            remaining_ms: p.timeout_ms.saturating_sub(elapsed),
            frontier,
        })
    }

    /// All elections, or those awaiting `voter`'s ballot. Only interactive
    /// voters have anything pending: the others vote on their own.
    fn list(&self, pending_for: Option<&str>) -> Result<Vec<ElectionView>, ApiError> {
        let Some(name) = pending_for else {
            return Ok(self.elections.keys().filter_map(|id| self.view(*id)).collect());
        };
        let p = self.voter(name)?;
        if self.cfg.voters[p.0 as usize - 1].policy != VotePolicy::Interactive {
            return Ok(Vec::new());
        }
        Ok(self
            .elections
            .iter()
            .filter(|(_, m)| m.decision.is_none() && !m.voted.contains(&p))
            .filter_map(|(id, _)| self.view(*id))
            .collect())
    }

    fn vote(&mut self, id: ElectionId, voter: &str, vote: bool, reply: Reply<()>) {
        let p = match self.voter(voter) {
            Ok(p) => p,
            Err(e) => {
                let _ = reply.send(Err(e));
                return;
            }
        };
        let Some(m) = self.elections.get_mut(&id) else {
            let _ = reply.send(Err(ApiError::NotFound(format!("unknown election {id}"))));
            return;
        };
        if m.decision.is_some() {
            let _ = reply.send(Err(ApiError::Conflict(format!("election {id} is already decided"))));
            return;
        }
        if !m.voted.insert(p) {
            let _ = reply.send(Err(ApiError::Conflict(format!("{voter} already voted in {id}"))));
            return;
        }
        let (tx, rx) = oneshot::channel();
        self.router.vote(p, id, vote, tx);
        tokio::spawn(async move {
            let result = match rx.await {
                Ok(Ok(())) => Ok(()),
                Ok(Err(CoreError::AlreadyVoted)) => Err(ApiError::Conflict(format!("voter already voted in {id}"))),
                Ok(Err(e)) => Err(ApiError::Conflict(e.to_string())),
                Err(_) => Err(ApiError::Unavailable("voter node stopped".into())),
            };
            let _ = reply.send(result);
        });
    }

    fn edge_specs(&self, edges: impl Iterator<Item = DelegationEdge>) -> Vec<EdgeSpec> {
        edges.map(|e| EdgeSpec { to: self.name(e.to), trust: e.trust }).collect()
    }

    fn delegations(&self, voter: &str) -> Result<DelegationView, ApiError> {
        let p = self.voter(voter)?;
        let edges = self.overrides.get(&p).map(|es| self.edge_specs(es.iter().copied()));
        let configured =
            self.rules.iter().map(|r| self.edge_specs(r.delegation.iter().copied().filter(|e| e.from == p))).collect();
        let name = self.name(p);
        let pending = self
            .elections
            .iter()
            .filter(|(_, m)| m.decision.is_none())
            .filter(|(_, m)| matches!(&m.kind, ElectionKind::Delegation { voter, .. } if *voter == name))
            .map(|(id, _)| *id)
            .collect();
        Ok(DelegationView { voter_id: name, edges, configured, pending })
    }

    /// Validates new edges and puts them to a vote. A transfer that would
    /// lift the delegate above the weight cap of any configured rule is
    /// refused outright.
    fn put_delegations(&mut self, voter: &str, edges: Vec<EdgeSpec>) -> Result<ElectionId, ApiError> {
        let from = self.voter(voter)?;
        let mut seen = BTreeSet::new();
        for e in &edges {
            let to = self.cfg.voter_id(&e.to).ok_or_else(|| bad(format!("unknown delegate {:?}", e.to)))?;
            if to == from {
                return Err(bad("a voter cannot delegate to itself"));
            }
            if e.trust == 0 {
                return Err(bad("trust must be positive"));
            }
            if !seen.insert(to) {
                return Err(bad(format!("duplicate edge to {:?}", e.to)));
            }
            for r in &self.rules {
                let total: u64 = r.weights.iter().sum();
                let (w_from, w_to) = (r.weights[from.0 as usize - 1], r.weights[to.0 as usize - 1]);
                if w_from > 0 && !r.max_weight.admits(w_from + w_to, total) {
                    return Err(bad(format!(
                        "delegating {w_from} to {} (weight {w_to}) exceeds the cap {} of {total}",
                        e.to, r.max_weight
                    )));
                }
            }
        }
        let name = self.name(from);
        let listed: Vec<String> = edges.iter().map(|e| format!("{}:{}", e.to, e.trust)).collect();
        let command = format!("privocracy delegate {name} {}", listed.join(","));
        self.issue(&name, command.trim_end(), false, ElectionKind::Delegation { voter: name.clone(), edges })
    }

    fn audit(&mut self, op: ElectionId, issuer: &str) -> Result<ElectionId, ApiError> {
        let m = self.elections.get(&op).ok_or_else(|| ApiError::NotFound(format!("unknown operation {op}")))?;
        if m.decision.is_none() {
            return Err(ApiError::Conflict(format!("operation {op} is not decided yet")));
        }
        self.issue(issuer, &format!("audit {op}"), false, ElectionKind::Audit { op })
    }

    fn audit_view(&self, id: ElectionId) -> Result<AuditView, ApiError> {
        let not_found = || ApiError::NotFound(format!("unknown audit {id}"));
        let m = self.elections.get(&id).ok_or_else(not_found)?;
        let ElectionKind::Audit { op } = m.kind else { return Err(not_found()) };
        if let Some(v) = &m.audit {
            return Ok(v.clone());
        }
        let status = match m.decision {
            None => "pending",
            Some(d) if !d.approved => "rejected",
            Some(_) => "disclosing",
        };
        Ok(AuditView { election_id: id, op, status: status.into(), votes: BTreeMap::new(), responders: 0 })
    }
}
