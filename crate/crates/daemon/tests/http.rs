//! The HTTP API end to end: a daemon with embedded voters on its own
//! runtime, driven by a blocking client.

use std::collections::BTreeMap;
use std::net::TcpListener;
use std::path::Path;
use std::time::{Duration, Instant};

use privocracy_daemon::config::DaemonConfig;
use privocracy_daemon::{run_voter_process, start, DaemonOptions};
use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde_json::{json, Value};

struct Daemon {
    _rt: tokio::runtime::Runtime,
    base: String,
    http: Client,
}

fn config(policies: [&str; 4], extra: &str) -> String {
    let mut s = String::from("group = \"fast61\"\n");
    for (i, p) in policies.iter().enumerate() {
        s += &format!("[[voters]]\nname = \"voter{}\"\npolicy = \"{p}\"\n", i + 1);
    }
    s + extra
}

const RULE: &str = r#"
[[elections]]
weights = [["voter1", 1], ["voter2", 1], ["voter3", 1], ["voter4", 1]]
threshold = 0.5
timeout = "30s"
"#;

fn launch(cfg: &str, data: Option<&Path>) -> Daemon {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let mut opts = DaemonOptions::new(cfg.parse::<DaemonConfig>().unwrap());
    opts.data_dir = data.map(Path::to_path_buf);
    let running = rt.block_on(start(opts)).unwrap();
    Daemon { _rt: rt, base: format!("http://{}", running.http_addr), http: Client::new() }
}

impl Daemon {
    fn get(&self, path: &str) -> Response {
        self.http.get(format!("{}{path}", self.base)).send().unwrap()
    }

    fn post(&self, path: &str, body: Value) -> Response {
        self.http.post(format!("{}{path}", self.base)).json(&body).send().unwrap()
    }

    fn json(&self, path: &str) -> Value {
        let r = self.get(path);
        assert_eq!(r.status(), StatusCode::OK, "GET {path}");
        r.json().unwrap()
    }

    fn issue(&self, command: &str, emergency: bool) -> String {
        let r = self.post("/elections", json!({ "issuer": "alice", "command": command, "emergency": emergency }));
        assert_eq!(r.status(), StatusCode::CREATED);
        r.json::<Value>().unwrap()["electionId"].as_str().unwrap().to_string()
    }

    fn vote(&self, id: &str, voter: Value, vote: Value) -> StatusCode {
        self.post(&format!("/elections/{id}/vote"), json!({ "voterId": voter, "vote": vote })).status()
    }

    fn wait_until(&self, path: &str, done: impl Fn(&Value) -> bool) -> Value {
        let start = Instant::now();
        loop {
            let v = self.json(path);
            if done(&v) {
                return v;
            }
            assert!(start.elapsed() < Duration::from_secs(30), "timed out waiting on {path}: {v}");
            std::thread::sleep(Duration::from_millis(20));
        }
    }

    fn decided(&self, id: &str) -> Value {
        self.wait_until(&format!("/elections/{id}"), |v| v["status"] == "decided")
    }

    fn kinds(&self, id: &str) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for e in self.json(&format!("/log?election={id}")).as_array().unwrap() {
            *counts.entry(e["kind"].as_str().unwrap().to_string()).or_default() += 1;
        }
        counts
    }
}

#[test]
fn issue_then_poll_until_decided() {
    let d = launch(&config(["approve"; 4], RULE), None);
    let id = d.issue("cat file.txt", false);
    let v = d.decided(&id);
    assert_eq!(v["decision"], json!({ "approved": true, "mode": "normal" }));
    assert_eq!(v["execution"]["status"], 0);
    assert_eq!(v["execution"]["simulated"], true);
    assert!(v.get("tally").is_none() && v["decision"].get("tally").is_none());

    let kinds = d.kinds(&id);
    assert!(kinds["REQUEST"] >= 1);
    assert!(kinds["PARTIAL_TALLY"] >= 2);
    assert_eq!(kinds["DECISION"], 1);
    assert_eq!(kinds["EXECUTION"], 1);

    let all = d.json("/log");
    let seqs: Vec<u64> = all.as_array().unwrap().iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, (1..=seqs.len() as u64).collect::<Vec<_>>());
    let tail = d.json(&format!("/log?after={}", seqs.len() - 2));
    assert_eq!(tail.as_array().unwrap().len(), 2);
    for e in all.as_array().unwrap() {
        assert!(e["payload"].get("tally").is_none() && e["payload"].get("partial").is_none());
    }
}

#[test]
fn rejected_command_is_not_executed() {
    let d = launch(&config(["reject"; 4], RULE), None);
    let id = d.issue("rm -rf /srv", false);
    let v = d.decided(&id);
    assert_eq!(v["decision"]["approved"], false);
    assert!(v["execution"].is_null());
    let kinds = d.kinds(&id);
    assert_eq!(kinds["DECISION"], 1);
    assert!(!kinds.contains_key("EXECUTION"));
}

#[test]
fn interactive_votes_and_double_votes() {
    let d = launch(&config(["interactive"; 4], RULE), None);
    let id = d.issue("systemctl restart nginx", false);

    let pending = d.json("/elections?pending=voter1");
    let item = &pending.as_array().unwrap()[0];
    assert_eq!(item["electionId"], id.as_str());
    assert_eq!(item["mode"], "normal");
    assert_eq!(item["weights"]["voter3"], 1);
    assert!(item["remainingMs"].as_u64().unwrap() <= 30_000);
    assert_eq!(d.post("/audits", json!({ "opId": id })).status(), StatusCode::CONFLICT);

    assert_eq!(d.vote(&id, json!("voter1"), json!("approve")), StatusCode::ACCEPTED);
    assert_eq!(d.vote(&id, json!("voter1"), json!("reject")), StatusCode::CONFLICT);
    assert!(d.json("/elections?pending=voter1").as_array().unwrap().is_empty());
    assert_eq!(d.json("/elections?pending=voter2").as_array().unwrap().len(), 1);

    // The ballot reaches the other voters, who report logging its share.
    d.wait_until(&format!("/log?election={id}"), |log| {
        log.as_array().unwrap().iter().any(|e| e["kind"] == "SHARE_RECEIPT" && e["payload"]["origin"] == "voter1")
    });

    assert_eq!(d.vote(&id, json!("voter2"), json!(false)), StatusCode::ACCEPTED);
    assert_eq!(d.vote(&id, json!(3), json!(true)), StatusCode::ACCEPTED);
    assert_eq!(d.vote(&id, json!("voter4"), json!("approve")), StatusCode::ACCEPTED);
    let v = d.decided(&id);
    assert_eq!(v["decision"]["approved"], true);
    assert_eq!(d.vote(&id, json!("voter2"), json!(true)), StatusCode::CONFLICT);
    assert!(d.json("/elections?pending=voter2").as_array().unwrap().is_empty());
}

#[test]
fn error_statuses() {
    let d = launch(&config(["approve"; 4], &RULE.replace("weights", "resource = \"systemctl *\"\nweights")), None);
    let unknown = "00112233445566778899aabbccddeeff";
    assert_eq!(d.get(&format!("/elections/{unknown}")).status(), StatusCode::NOT_FOUND);
    assert_eq!(d.get("/elections/not-hex").status(), StatusCode::BAD_REQUEST);
    assert_eq!(d.get("/nowhere").status(), StatusCode::NOT_FOUND);
    assert_eq!(d.get(&format!("/audits/{unknown}")).status(), StatusCode::NOT_FOUND);

    let raw = d.http.post(format!("{}/elections", d.base)).body("{not json").send().unwrap();
    assert_eq!(raw.status(), StatusCode::BAD_REQUEST);
    assert_eq!(d.post("/elections", json!({ "issuer": "alice" })).status(), StatusCode::BAD_REQUEST);
    assert_eq!(d.post("/elections", json!({ "issuer": "alice", "command": "rm x" })).status(), StatusCode::BAD_REQUEST);
    assert_eq!(d.post("/audits", json!({ "opId": unknown })).status(), StatusCode::NOT_FOUND);

    let id = d.issue("systemctl status", false);
    assert_eq!(d.vote(unknown, json!("voter1"), json!(true)), StatusCode::NOT_FOUND);
    assert_eq!(d.vote(&id, json!("mallory"), json!(true)), StatusCode::NOT_FOUND);
    assert_eq!(d.vote(&id, json!("voter1"), json!("maybe")), StatusCode::BAD_REQUEST);
    assert_eq!(d.get("/delegations/mallory").status(), StatusCode::NOT_FOUND);
}

#[test]
fn delegation_changes_go_through_an_election() {
    let rule = r#"
[[elections]]
weights = [["voter1", 5], ["voter2", 3], ["voter3", 1], ["voter4", 1]]
threshold = 0.5
max_weight = 0.3
timeout = "30s"
"#;
    let d = launch(&config(["approve"; 4], rule), None);
    let put = |voter: &str, edges: Value| {
        d.http.put(format!("{}/delegations/{voter}", d.base)).json(&json!({ "edges": edges })).send().unwrap()
    };
    // 5 + 3 of 10 is above the 0.3 cap.
    assert_eq!(put("voter1", json!([{ "to": "voter2", "trust": 5 }])).status(), StatusCode::BAD_REQUEST);
    assert_eq!(put("voter3", json!([{ "to": "voter3", "trust": 1 }])).status(), StatusCode::BAD_REQUEST);
    assert_eq!(put("voter3", json!([{ "to": "nobody", "trust": 1 }])).status(), StatusCode::BAD_REQUEST);

    let r = put("voter3", json!([{ "to": "voter4", "trust": 2 }]));
    assert_eq!(r.status(), StatusCode::ACCEPTED);
    let change = r.json::<Value>().unwrap()["electionId"].as_str().unwrap().to_string();

    assert_eq!(d.decided(&change)["decision"]["approved"], true);
    let after = d.json("/delegations/voter3");
    assert_eq!(after["edges"], json!([{ "to": "voter4", "trust": 2 }]));
    assert_eq!(after["pending"], json!([]));
    assert_eq!(d.kinds(&change)["DECISION"], 1);

    // Later proposals carry the new edge.
    let id = d.issue("uptime", false);
    let log = d.json(&format!("/log?election={id}"));
    let request = log.as_array().unwrap().iter().find(|e| e["kind"] == "REQUEST").unwrap();
    assert_eq!(request["payload"]["proposal"]["delegation"], json!([{ "from": 3, "to": 4, "trust": 2 }]));
}

#[test]
fn audit_reveals_who_approved() {
    let d = launch(&config(["approve", "reject", "approve", "approve"], RULE), None);
    let op = d.issue("cat /etc/shadow", false);
    assert_eq!(d.decided(&op)["decision"]["approved"], true);

    let r = d.post("/audits", json!({ "opId": op, "issuer": "auditor" }));
    assert_eq!(r.status(), StatusCode::CREATED);
    let audit = r.json::<Value>().unwrap()["electionId"].as_str().unwrap().to_string();
    let v = d.wait_until(&format!("/audits/{audit}"), |v| v["status"] == "complete");
    assert_eq!(v["op"], op.as_str());
    assert_eq!(
        v["votes"],
        json!({ "voter1": "approve", "voter2": "reject", "voter3": "approve", "voter4": "approve" })
    );
    assert!(d.kinds(&audit)["AUDIT"] >= 2);
    assert_eq!(d.get(&format!("/audits/{op}")).status(), StatusCode::NOT_FOUND);
}

#[test]
fn emergency_approval_is_early() {
    let d = launch(&config(["approve"; 4], RULE), None);
    let id = d.issue("restart svc", true);
    let v = d.decided(&id);
    assert_eq!(v["mode"], "emergency");
    assert_eq!(v["decision"], json!({ "approved": true, "mode": "early_approve" }));
    assert_eq!(v["frontier"]["requiredWeight"], 3.0);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

#[test]
fn remote_voter_over_tcp() {
    let (peer, remote) = (free_port(), free_port());
    let voters = config(["approve", "approve", "reject", "interactive"], RULE)
        .replace("name = \"voter4\"", &format!("name = \"voter4\"\naddress = \"127.0.0.1:{remote}\""));
    let cfg = format!("peer_address = \"127.0.0.1:{peer}\"\n{voters}");
    let d = launch(&cfg, None);
    let parsed: DaemonConfig = cfg.parse().unwrap();
    d._rt.spawn(async move { run_voter_process(parsed, "voter4", None, Some(9)).await.unwrap() });

    let id = d.issue("apt upgrade", false);
    assert_eq!(d.json("/elections?pending=voter4").as_array().unwrap().len(), 1);
    assert_eq!(d.vote(&id, json!("voter4"), json!("approve")), StatusCode::ACCEPTED);
    assert_eq!(d.vote(&id, json!("voter4"), json!("approve")), StatusCode::CONFLICT);
    let v = d.decided(&id);
    assert_eq!(v["decision"]["approved"], true);
    let log = d.json(&format!("/log?election={id}"));
    let tallies: Vec<&str> = log
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["kind"] == "SHARE_RECEIPT" && e["payload"]["origin"] == "voter4")
        .map(|e| e["payload"]["voter"].as_str().unwrap())
        .collect();
    assert!(!tallies.is_empty(), "nobody logged the remote voter's share");
}

#[test]
fn restart_keeps_decisions_and_resumes_pending_elections() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(["interactive"; 4], RULE);
    let (done, open, before) = {
        let d = launch(&cfg, Some(dir.path()));
        let done = d.issue("ls", false);
        for i in 1..=4 {
            assert_eq!(d.vote(&done, json!(i), json!(i != 2)), StatusCode::ACCEPTED);
        }
        assert_eq!(d.decided(&done)["decision"]["approved"], true);
        let open = d.issue("reboot", false);
        assert_eq!(d.vote(&open, json!("voter1"), json!(true)), StatusCode::ACCEPTED);
        (done, open, d.json("/log"))
        // Dropping the runtime stops every task mid-flight.
    };

    let d = launch(&cfg, Some(dir.path()));
    let after = d.json("/log");
    let n = before.as_array().unwrap().len();
    assert_eq!(after.as_array().unwrap()[..n], before.as_array().unwrap()[..]);
    assert_eq!(d.json(&format!("/elections/{done}"))["decision"]["approved"], true);
    assert_eq!(d.json(&format!("/elections/{open}"))["status"], "pending");

    // The embedded voters restarted empty, so every ballot is cast again.
    for i in 1..=4 {
        assert_eq!(d.vote(&open, json!(i), json!(i != 4)), StatusCode::ACCEPTED);
    }
    assert_eq!(d.decided(&open)["decision"]["approved"], true);
    assert_eq!(d.kinds(&done)["DECISION"], 1);
    assert_eq!(d.kinds(&open)["DECISION"], 1);
}
