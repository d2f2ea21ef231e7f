//! The `privocracy` command line.
//!
//! ```text
//! privocracy "cat file.txt"            # issue and wait for the decision
//! privocracy -emergency "restart svc"  # emergency election
//! privocracy -audit <op_id>            # reveal the ballots of a decided op
//! privocracy status|log|simulate|leakage ...
//! ```
//!
//! Exit codes: 0 approved (or success), 1 rejected (or a check failed),
//! 2 error, 3 still pending.

pub mod client;
pub mod leak;
pub mod sim;

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::Value;

use crate::client::{Client, ClientError};

pub const APPROVED: i32 = 0;
pub const REJECTED: i32 = 1;
pub const ERROR: i32 = 2;
pub const PENDING: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "privocracy", version, about = "Collectively authorized command execution")]
pub struct Cli {
    /// Daemon base URL or host:port.
    #[arg(long, global = true, env = "PRIVOCRACY_DAEMON")]
    pub daemon: Option<String>,
    /// Client settings file (TOML: daemon, issuer, poll_ms, wait_secs).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug)]
pub struct IssueArgs {
    /// Issuer name; defaults to the client config, then $USER.
    #[arg(long)]
    pub issuer: Option<String>,
    /// Return right after issuing instead of waiting for the decision.
    #[arg(long)]
    pub no_wait: bool,
    /// The command line to authorize; multiple words are joined by spaces.
    #[arg(required = true, trailing_var_arg = true, allow_hyphen_values = true)]
    pub command: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Put a command to a vote and wait for the decision.
    Issue {
        #[arg(long)]
        emergency: bool,
        #[command(flatten)]
        args: IssueArgs,
    },
    /// Put a command to an emergency vote.
    Emergency {
        #[command(flatten)]
        args: IssueArgs,
    },
    /// Audit a decided operation and print each voter's revealed ballot.
    Audit {
        op_id: String,
        #[arg(long)]
        issuer: Option<String>,
    },
    /// Show an election; exits 0/1 when decided, 3 while pending.
    Status {
        id: String,
        /// Poll until decided.
        #[arg(long)]
        wait: bool,
    },
    /// Print the daemon's command log.
    Log {
        #[arg(long, default_value_t = 0)]
        after: u64,
        #[arg(long)]
        election: Option<String>,
    },
    /// Run the network simulator.
    Simulate {
        #[command(subcommand)]
        what: sim::Simulate,
    },
    /// Bound what a tally observer learns about individual votes.
    Leakage(leak::LeakageArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

const SUBCOMMANDS: [&str; 8] = ["issue", "emergency", "audit", "status", "log", "simulate", "leakage", "help"];

/// Rewrites the short forms into subcommands: `-audit X` becomes
/// `audit X`, `-emergency CMD` becomes `emergency CMD`, and a bare
/// command becomes `issue CMD`.
pub fn normalize_args(args: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len() + 1);
    let mut it = args.into_iter();
    out.extend(it.next());
    let mut rest: Vec<String> = it.collect();
    let mut i = 0;
    while i < rest.len() {
        let a = rest[i].as_str();
        if a == "--json" || a.starts_with("--daemon=") || a.starts_with("--config=") {
            i += 1;
        } else if a == "--daemon" || a == "--config" {
            i += 2;
        } else {
            break;
        }
    }
    if i < rest.len() {
        let first = rest[i].clone();
        match first.as_str() {
            "-audit" => rest[i] = "audit".into(),
            "-emergency" => rest[i] = "emergency".into(),
            s if SUBCOMMANDS.contains(&s) || s.starts_with('-') => {}
            _ => rest.insert(i, "issue".into()),
        }
    }
    out.extend(rest);
    out
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientConfig {
    pub daemon: Option<String>,
    pub issuer: Option<String>,
    pub poll_ms: Option<u64>,
    /// How long to wait for a decision beyond the election's own timeout.
    pub wait_secs: Option<u64>,
}

pub struct Ctx {
    pub client: Client,
    pub json: bool,
    pub issuer: Option<String>,
    pub poll: Duration,
    pub grace: Duration,
}

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("privocracy: {msg}");
    ERROR
}

pub fn run(cli: Cli) -> i32 {
    let cfg = match &cli.config {
        Some(path) => match std::fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| {
            toml::from_str::<ClientConfig>(&t).map_err(|e| e.to_string())
        }) {
            Ok(c) => c,
            Err(e) => return fail(format!("{}: {e}", path.display())),
        },
        None => ClientConfig::default(),
    };
    let daemon = cli.daemon.or(cfg.daemon).unwrap_or_else(|| "http://127.0.0.1:7800".into());
    let ctx = Ctx {
        client: Client::new(&daemon),
        json: cli.json,
        issuer: cfg.issuer,
        poll: Duration::from_millis(cfg.poll_ms.unwrap_or(100)),
        grace: Duration::from_secs(cfg.wait_secs.unwrap_or(30)),
    };
    let result = match cli.cmd {
        Cmd::Issue { emergency, args } => issue(&ctx, args, emergency),
        Cmd::Emergency { args } => issue(&ctx, args, true),
        Cmd::Audit { op_id, issuer } => audit(&ctx, &op_id, issuer),
        Cmd::Status { id, wait } => status(&ctx, &id, wait),
        Cmd::Log { after, election } => log(&ctx, after, election),
        Cmd::Simulate { what } => return sim::run(what, cli.json),
        Cmd::Leakage(args) => return leak::run(args, cli.json),
    };
    result.unwrap_or_else(fail)
}

fn issuer(ctx: &Ctx, explicit: Option<String>) -> String {
    explicit
        .or_else(|| ctx.issuer.clone())
        .or_else(|| std::env::var("USER").ok())
        .unwrap_or_else(|| "unknown".into())
}

fn mode_label(mode: &str) -> &'static str {
    match mode {
        "early_approve" | "early_reject" => "EARLY",
        "late" => "LATE",
        _ => "NORMAL",
    }
}

/// Prints an election and returns its exit code.
fn report_election(ctx: &Ctx, v: &Value) -> i32 {
    let code = match v["decision"]["approved"].as_bool() {
        Some(true) => APPROVED,
        Some(false) => REJECTED,
        None => PENDING,
    };
    if ctx.json {
        println!("{v:#}");
        return code;
    }
    let id = v["electionId"].as_str().unwrap_or("?");
    match code {
        PENDING => println!("election {id}: PENDING ({} ms left)", v["remainingMs"]),
        _ => {
            let verdict = if code == APPROVED { "APPROVED" } else { "REJECTED" };
            println!("election {id}: {verdict} (mode {})", mode_label(v["decision"]["mode"].as_str().unwrap_or("")));
        }
    }
    println!("command: {}", v["command"].as_str().unwrap_or(""));
    if let Some(out) = v["execution"]["output"].as_str() {
        println!("exit status: {}", v["execution"]["status"]);
        println!("output: {out}");
    }
    code
}

fn wait_decided(ctx: &Ctx, id: &str) -> Result<Value, ClientError> {
    let first = ctx.client.election(id)?;
    let limit = Duration::from_millis(first["timeoutMs"].as_u64().unwrap_or(0)) + ctx.grace;
    let start = std::time::Instant::now();
    let mut v = first;
    while v["status"] != "decided" && start.elapsed() < limit {
        std::thread::sleep(ctx.poll);
        v = ctx.client.election(id)?;
    }
    Ok(v)
}

fn issue(ctx: &Ctx, args: IssueArgs, emergency: bool) -> Result<i32, ClientError> {
    let command = args.command.join(" ");
    let id = ctx.client.issue(&issuer(ctx, args.issuer), &command, emergency)?;
    if args.no_wait {
        if ctx.json {
            println!("{}", serde_json::json!({ "electionId": id }));
        } else {
            println!("election {id}: issued");
        }
        return Ok(PENDING);
    }
    let v = wait_decided(ctx, &id)?;
    Ok(report_election(ctx, &v))
}

fn status(ctx: &Ctx, id: &str, wait: bool) -> Result<i32, ClientError> {
    let v = if wait { wait_decided(ctx, id)? } else { ctx.client.election(id)? };
    Ok(report_election(ctx, &v))
}

fn audit(ctx: &Ctx, op: &str, who: Option<String>) -> Result<i32, ClientError> {
    let id = ctx.client.audit(op, &issuer(ctx, who))?;
    let decision = wait_decided(ctx, &id)?;
    let start = std::time::Instant::now();
    let mut v = ctx.client.audit_view(&id)?;
    while v["status"] == "disclosing" && start.elapsed() < ctx.grace {
        std::thread::sleep(ctx.poll);
        v = ctx.client.audit_view(&id)?;
    }
    let code = match v["status"].as_str() {
        Some("complete") => APPROVED,
        Some("rejected") => REJECTED,
        Some("pending") if decision["status"] != "decided" => PENDING,
        _ => ERROR,
    };
    if ctx.json {
        println!("{v:#}");
        return Ok(code);
    }
    println!("audit {id} of operation {op}: {}", v["status"].as_str().unwrap_or("?"));
    if let Some(votes) = v["votes"].as_object() {
        for (voter, ballot) in votes {
            println!("  {voter:<12} {}", ballot.as_str().unwrap_or("?"));
        }
    }
    if code == ERROR {
        eprintln!("privocracy: audit did not complete; fewer than n - f voters disclosed");
    }
    Ok(code)
}

fn log(ctx: &Ctx, after: u64, election: Option<String>) -> Result<i32, ClientError> {
    let entries = ctx.client.log(after, election.as_deref())?;
    if ctx.json {
        println!("{entries:#}");
        return Ok(APPROVED);
    }
    for e in entries.as_array().into_iter().flatten() {
        println!(
            "{:>6} {} {:<13} {} {}",
            e["seq"],
            e["timestamp"],
            e["kind"].as_str().unwrap_or("?"),
            e["election"].as_str().unwrap_or("?"),
            e["payload"]
        );
    }
    Ok(APPROVED)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(args: &[&str]) -> Vec<String> {
        normalize_args(args.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn short_forms_become_subcommands() {
        assert_eq!(norm(&["privocracy", "cat file.txt"]), ["privocracy", "issue", "cat file.txt"]);
        assert_eq!(norm(&["privocracy", "cat", "file.txt"]), ["privocracy", "issue", "cat", "file.txt"]);
        assert_eq!(norm(&["privocracy", "-audit", "ab12"]), ["privocracy", "audit", "ab12"]);
        assert_eq!(norm(&["privocracy", "-emergency", "restart svc"]), ["privocracy", "emergency", "restart svc"]);
        assert_eq!(
            norm(&["privocracy", "--daemon", "x:1", "--json", "ls -l"]),
            ["privocracy", "--daemon", "x:1", "--json", "issue", "ls -l"]
        );
        assert_eq!(norm(&["privocracy", "status", "ab"]), ["privocracy", "status", "ab"]);
        assert_eq!(norm(&["privocracy", "--help"]), ["privocracy", "--help"]);
        assert_eq!(norm(&["privocracy"]), ["privocracy"]);
    }

    #[test]
    fn every_form_parses() {
        for args in [
            vec!["privocracy", "cat file.txt"],
            vec!["privocracy", "-emergency", "restart", "svc"],
            vec!["privocracy", "-audit", "00"],
            vec!["privocracy", "status", "00", "--wait"],
            vec!["privocracy", "log", "--after", "3"],
            vec!["privocracy", "simulate", "sweep", "--f", "1,2"],
            vec!["privocracy", "leakage", "--weights", "1,2,4", "--votes", "101"],
        ] {
            let cli = Cli::try_parse_from(norm(&args));
            assert!(cli.is_ok(), "{args:?}: {}", cli.err().unwrap());
        }
        let cli = Cli::try_parse_from(norm(&["privocracy", "-emergency", "restart", "svc"])).unwrap();
        match cli.cmd {
            Cmd::Emergency { args } => assert_eq!(args.command.join(" "), "restart svc"),
            other => panic!("{other:?}"),
        }
    }
}
