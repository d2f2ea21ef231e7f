//! The HTTP API. Bodies and responses are JSON; errors are
//! `{"error": "<message>"}` with 400, 404, 409 or 503.

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use privocracy_core::ElectionId;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{mpsc, oneshot};

use crate::service::{ApiError, EdgeSpec, Reply, Request};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

/// Cloneable access to the service task.
#[derive(Clone)]
pub struct Handle {
    tx: mpsc::UnboundedSender<Request>,
}

impl Handle {
    pub fn new(tx: mpsc::UnboundedSender<Request>) -> Self {
        Handle { tx }
    }

    async fn call<T>(&self, make: impl FnOnce(Reply<T>) -> Request) -> Result<T, ApiError> {
        let (tx, rx) = oneshot::channel();
        let stopped = || ApiError::Unavailable("daemon is shutting down".into());
        self.tx.send(make(tx)).map_err(|_| stopped())?;
        rx.await.map_err(|_| stopped())?
    }
}

/// Parses a body ourselves so every malformed request is a 400.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

fn election_id(raw: &str) -> Result<ElectionId, ApiError> {
    raw.parse().map_err(|_| ApiError::BadRequest(format!("malformed election id {raw:?}")))
}

/// A voter named in a request, by name or numeric id.
#[derive(Deserialize)]
#[serde(untagged)]
enum VoterRef {
    Id(u32),
    Name(String),
}

impl VoterRef {
    fn into_string(self) -> String {
        match self {
            VoterRef::Id(i) => i.to_string(),
            VoterRef::Name(n) => n,
        }
    }
}

/// `true`/`false` or `"approve"`/`"reject"`.
#[derive(Deserialize)]
#[serde(untagged)]
enum Ballot {
    Bool(bool),
    Word(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IssueBody {
    issuer: String,
    command: String,
    #[serde(default)]
    emergency: bool,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct VoteBody {
    voter_id: VoterRef,
    vote: Ballot,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DelegationBody {
    edges: Vec<EdgeSpec>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct AuditBody {
    op_id: String,
    #[serde(default = "default_auditor")]
    issuer: String,
}

fn default_auditor() -> String {
    "privocracy".into()
}

#[derive(Deserialize)]
struct ListQuery {
    pending: Option<String>,
}

#[derive(Deserialize)]
struct LogQuery {
    #[serde(default)]
    after: u64,
    election: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Created {
    election_id: ElectionId,
}

pub fn router(handle: Handle) -> Router {
    Router::new()
        .route("/elections", post(issue).get(list))
        .route("/elections/:id", get(election))
        .route("/elections/:id/vote", post(vote))
        .route("/delegations/:voter", get(get_delegations).put(put_delegations))
        .route("/audits", post(audit))
        .route("/audits/:id", get(audit_view))
        .route("/log", get(log))
        .fallback(|| async { ApiError::NotFound("no such endpoint".into()) })
        .with_state(handle)
}

async fn issue(State(h): State<Handle>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let b: IssueBody = parse(&body)?;
    let id = h
        .call(|reply| Request::Issue { issuer: b.issuer, command: b.command, emergency: b.emergency, reply })
        .await?;
    Ok((StatusCode::CREATED, Json(Created { election_id: id })))
}

async fn list(State(h): State<Handle>, Query(q): Query<ListQuery>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(h.call(|reply| Request::List { pending_for: q.pending, reply }).await?))
}

async fn election(State(h): State<Handle>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let id = election_id(&id)?;
    Ok(Json(h.call(|reply| Request::Election { id, reply }).await?))
}

async fn vote(State(h): State<Handle>, Path(id): Path<String>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let id = election_id(&id)?;
    let b: VoteBody = parse(&body)?;
    let vote = match b.vote {
        Ballot::Bool(v) => v,
        Ballot::Word(w) if w.eq_ignore_ascii_case("approve") => true,
        Ballot::Word(w) if w.eq_ignore_ascii_case("reject") => false,
        Ballot::Word(w) => return Err(ApiError::BadRequest(format!("vote must be approve or reject, not {w:?}"))),
    };
    let voter = b.voter_id.into_string();
    h.call(|reply| Request::Vote { id, voter, vote, reply }).await?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "accepted": true }))))
}

async fn get_delegations(State(h): State<Handle>, Path(voter): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(h.call(|reply| Request::GetDelegations { voter, reply }).await?))
}

async fn put_delegations(
    State(h): State<Handle>,
    Path(voter): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let b: DelegationBody = parse(&body)?;
    let id = h.call(|reply| Request::PutDelegations { voter, edges: b.edges, reply }).await?;
    Ok((StatusCode::ACCEPTED, Json(Created { election_id: id })))
}

async fn audit(State(h): State<Handle>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let b: AuditBody = parse(&body)?;
    let op = election_id(&b.op_id)?;
    let id = h.call(|reply| Request::Audit { op, issuer: b.issuer, reply }).await?;
    Ok((StatusCode::CREATED, Json(Created { election_id: id })))
}

async fn audit_view(State(h): State<Handle>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let id = election_id(&id)?;
    Ok(Json(h.call(|reply| Request::AuditView { id, reply }).await?))
}

async fn log(State(h): State<Handle>, Query(q): Query<LogQuery>) -> Result<impl IntoResponse, ApiError> {
    let election = q.election.as_deref().map(election_id).transpose()?;
    Ok(Json(h.call(|reply| Request::Log { after: q.after, election, reply }).await?))
}
