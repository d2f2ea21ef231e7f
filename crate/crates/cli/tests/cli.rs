//! The `privocracy` binary against a daemon running in this process.

use std::net::TcpListener;
use std::process::{Command, Output};

use privocracy_daemon::config::DaemonConfig;
use privocracy_daemon::{start, DaemonOptions};
use serde_json::Value;

struct Daemon {
    _rt: tokio::runtime::Runtime,
    addr: String,
}

fn launch(policies: [&str; 4]) -> Daemon {
    let mut cfg = String::from("group = \"fast61\"\n");
    for (i, p) in policies.iter().enumerate() {
        cfg += &format!("[[voters]]\nname = \"voter{}\"\npolicy = \"{p}\"\n", i + 1);
    }
    cfg += r#"
[[elections]]
weights = [["voter1", 1], ["voter2", 1], ["voter3", 1], ["voter4", 1]]
threshold = 0.5
timeout = "30s"
"#;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let running = rt.block_on(start(DaemonOptions::new(cfg.parse::<DaemonConfig>().unwrap()))).unwrap();
    Daemon { _rt: rt, addr: running.http_addr.to_string() }
}

fn privocracy(d: &Daemon, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privocracy"))
        .env("PRIVOCRACY_DAEMON", &d.addr)
        .env("USER", "alice")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn election_id(o: &Output) -> String {
    let out = stdout(o);
    let line = out.lines().find(|l| l.starts_with("election ")).unwrap_or_else(|| panic!("no election line in {out:?}"));
    line["election ".len()..].split(':').next().unwrap().to_string()
}

#[test]
fn approved_command_exits_zero_and_shows_the_shim_output() {
    let d = launch(["approve"; 4]);
    let o = privocracy(&d, &["cat file.txt"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.contains(": APPROVED (mode NORMAL)"), "{out}");
    assert!(out.contains("command: cat file.txt"), "{out}");
    assert!(out.contains("output: [shim]"), "{out}");

    // Finished elections report the same thing every time.
    let id = election_id(&o);
    let first = privocracy(&d, &["status", &id]);
    let again = privocracy(&d, &["status", &id]);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(stdout(&first), stdout(&again));
    assert_eq!(stdout(&first), out);
}

#[test]
fn rejected_command_exits_one() {
    let d = launch(["reject", "reject", "reject", "approve"]);
    let o = privocracy(&d, &["rm", "-rf", "/srv/data"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(1), "{out}");
    assert!(out.contains(": REJECTED (mode NORMAL)"), "{out}");
    assert!(out.contains("command: rm -rf /srv/data"), "{out}");
    assert!(!out.contains("output:"), "a rejected command must not run: {out}");
    let id = election_id(&o);
    assert_eq!(privocracy(&d, &["status", &id]).status.code(), Some(1));
}

#[test]
fn emergency_decides_early() {
    let d = launch(["approve"; 4]);
    let o = privocracy(&d, &["-emergency", "restart svc"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.contains(": APPROVED (mode EARLY)"), "{out}");

    let o = privocracy(&d, &["--json", "-emergency", "restart", "svc"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mode"], "emergency");
    assert_eq!(v["command"], "restart svc");
    assert_eq!(v["decision"]["mode"], "early_approve");
}

#[test]
fn audit_prints_each_voters_ballot() {
    let d = launch(["approve", "reject", "approve", "approve"]);
    let o = privocracy(&d, &["cat /etc/shadow"]);
    assert_eq!(o.status.code(), Some(0));
    let op = election_id(&o);

    let o = privocracy(&d, &["-audit", &op]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}\n{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.contains(&format!("of operation {op}: complete")), "{out}");
    let ballots: Vec<(String, String)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let mut w = l.split_whitespace();
            (w.next().unwrap().to_string(), w.next().unwrap().to_string())
        })
        .collect();
    assert!(ballots.len() >= 3, "{out}");
    for (voter, ballot) in &ballots {
        let expected = if voter == "voter2" { "reject" } else { "approve" };
        assert_eq!(ballot, expected, "{out}");
    }

    // The log shows the audit's own election next to the operation.
    let log = privocracy(&d, &["--json", "log"]);
    let entries: Value = serde_json::from_str(&stdout(&log)).unwrap();
    assert!(entries.as_array().unwrap().iter().any(|e| e["kind"] == "AUDIT"));
    let o = privocracy(&d, &["log", "--election", &op]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().all(|l| l.contains(&op)));
}

#[test]
fn pending_status_exits_three() {
    let d = launch(["interactive"; 4]);
    let o = privocracy(&d, &["issue", "--no-wait", "reboot"]);
    assert_eq!(o.status.code(), Some(3));
    let id = election_id(&o);
    let o = privocracy(&d, &["status", &id]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains(": PENDING"));
}

#[test]
fn errors_exit_two() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let o = Command::new(env!("CARGO_BIN_EXE_privocracy"))
        .args(["--daemon", &format!("127.0.0.1:{port}"), "cat file.txt"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot reach daemon"));

    let d = launch(["approve"; 4]);
    for (id, status) in [("00".repeat(16), "404"), ("0123".into(), "400")] {
        let o = privocracy(&d, &["status", &id]);
        assert_eq!(o.status.code(), Some(2));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(status), "{err}");
    }
}

#[test]
fn leakage_from_an_observation_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("obs.txt");
    std::fs::write(&file, "f 0\nweights 1 2 4\ntally 5\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_privocracy"))
        .args(["--json", "leakage", "--observations", file.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    // Distinct powers of two with everyone counted: the tally is the vote vector.
    assert_eq!(r["compatible"], serde_json::json!([1]));
    assert_eq!(r["cumulative_bits"], serde_json::json!([3.0]));

    let o = Command::new(env!("CARGO_BIN_EXE_privocracy"))
        .args(["leakage", "--weights", "1,1,1,1", "--votes", "1101", "--rounds", "3"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("4-anonymous"), "{}", stdout(&o));
}

#[test]
fn simulate_drives_the_harness() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.toml");
    std::fs::write(&file, "n = 4\nseed = 3\npolicy = \"yes\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_privocracy")).args(["--json", "simulate", "run", file.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["n"], 4);
    assert!(m["election"]["violations"].as_array().unwrap().is_empty());

    let o = Command::new(env!("CARGO_BIN_EXE_privocracy"))
        .args(["simulate", "explore", "--primitive", "brb", "--behavior", "EQUIVOCATE", "--schedules", "20"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("20 schedules"));

    let o = Command::new(env!("CARGO_BIN_EXE_privocracy")).args(["simulate", "explore", "--primitive", "aba", "--behavior", "NOPE"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
