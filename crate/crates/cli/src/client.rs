//! A blocking client for the daemon's HTTP API.

use reqwest::blocking::{Client as Http, RequestBuilder};
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot reach daemon at {url}: {source}")]
    Unreachable { url: String, source: reqwest::Error },
    #[error("daemon answered {status}: {message}")]
    Api { status: u16, message: String },
    #[error("unexpected response: {0}")]
    Body(String),
}

pub struct Client {
    base: String,
    http: Http,
}

impl Client {
    /// `daemon` is a URL or a bare `host:port`.
    pub fn new(daemon: &str) -> Self {
        let base = if daemon.contains("://") { daemon.to_string() } else { format!("http://{daemon}") };
        Client { base: base.trim_end_matches('/').to_string(), http: Http::new() }
    }

    fn send(&self, req: RequestBuilder, path: &str) -> Result<Value, ClientError> {
        let url = format!("{}{path}", self.base);
        let resp = req.send().map_err(|source| ClientError::Unreachable { url, source })?;
        let status = resp.status();
        let body: Value = resp.json().map_err(|e| ClientError::Body(e.to_string()))?;
        if !status.is_success() {
            let message = body["error"].as_str().unwrap_or("no details").to_string();
            return Err(ClientError::Api { status: status.as_u16(), message });
        }
        Ok(body)
    }

    fn get(&self, path: &str) -> Result<Value, ClientError> {
        self.send(self.http.get(format!("{}{path}", self.base)), path)
    }

    fn post(&self, path: &str, body: Value) -> Result<Value, ClientError> {
        self.send(self.http.post(format!("{}{path}", self.base)).json(&body), path)
    }

    fn id(v: Value) -> Result<String, ClientError> {
        v["electionId"].as_str().map(str::to_string).ok_or_else(|| ClientError::Body(v.to_string()))
    }

    pub fn issue(&self, issuer: &str, command: &str, emergency: bool) -> Result<String, ClientError> {
        Self::id(self.post("/elections", json!({ "issuer": issuer, "command": command, "emergency": emergency }))?)
    }

    pub fn election(&self, id: &str) -> Result<Value, ClientError> {
        self.get(&format!("/elections/{id}"))
    }

    pub fn audit(&self, op: &str, issuer: &str) -> Result<String, ClientError> {
        Self::id(self.post("/audits", json!({ "opId": op, "issuer": issuer }))?)
    }

    pub fn audit_view(&self, id: &str) -> Result<Value, ClientError> {
        self.get(&format!("/audits/{id}"))
    }

    pub fn log(&self, after: u64, election: Option<&str>) -> Result<Value, ClientError> {
        match election {
            Some(e) => self.get(&format!("/log?after={after}&election={e}")),
            None => self.get(&format!("/log?after={after}")),
        }
    }
}
