//! `privocracy simulate ...`: the simulator and its sweeps.

use std::path::PathBuf;

use clap::{Subcommand, ValueEnum};
use privocracy_crypto::Fast61;
use privocracy_simnet::explore::{behavior_sweep, explore_primitive, Primitive};
use privocracy_simnet::secrecy::enumerate_secrecy;
use privocracy_simnet::sweep::sweep;
use privocracy_simnet::{run_scenario, Behavior, ScenarioSpec};
use serde::Serialize;

use crate::{APPROVED, REJECTED};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PrimitiveArg {
    Brb,
    Aba,
    Avss,
}

impl From<PrimitiveArg> for Primitive {
    fn from(p: PrimitiveArg) -> Self {
        match p {
            PrimitiveArg::Brb => Primitive::Brb,
            PrimitiveArg::Aba => Primitive::Aba,
            PrimitiveArg::Avss => Primitive::Avss,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Simulate {
    /// Run one scenario file (TOML) and report the election.
    Run {
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Latency and message counts over f and link latency.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 5])]
        f: Vec<usize>,
        /// Mean one-way link latencies in ms.
        #[arg(long, value_delimiter = ',', default_values_t = [5.0f64, 150.0])]
        latency: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Explore message schedules of one primitive, optionally with a
    /// Byzantine node (e.g. `--behavior 'CRASH_AT(40)'`).
    Explore {
        #[arg(long, value_enum)]
        primitive: PrimitiveArg,
        #[arg(long)]
        behavior: Option<Behavior>,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        schedules: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Every faulty behavior against every vote policy and network regime.
    Behaviors {
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 7])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        seeds: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Exhaustive ballot-secrecy check for four voters.
    Secrecy {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce(&T)) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
    } else {
        text(value);
    }
}

fn verdict(ok: bool) -> i32 {
    if ok {
        APPROVED
    } else {
        REJECTED
    }
}

pub fn run(what: Simulate, json: bool) -> i32 {
    match what {
        Simulate::Run { scenario, seed } => {
            let spec = std::fs::read_to_string(&scenario)
                .map_err(|e| format!("{}: {e}", scenario.display()))
                .and_then(|t| ScenarioSpec::from_toml(&t).map_err(|e| e.to_string()));
            let mut spec = match spec {
                Ok(s) => s,
                Err(e) => return crate::fail(e),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let m = match run_scenario(&spec) {
                Ok(m) => m,
                Err(e) => return crate::fail(e),
            };
            emit(json, &m, |m| {
                let e = &m.election;
                println!("n = {}, f = {}, seed = {}", m.n, m.f, m.seed);
                match &e.decision {
                    Some(d) => println!("decision: {d:?} via {:?}", e.lane),
                    None => println!("decision: none"),
                }
                println!("accepted: {:?} ({} correct)", e.accepted, e.correct_accepted);
                if let Some(l) = e.latency_ms {
                    println!("latency: {l:.1} ms (model time)");
                }
                println!("messages: {} over {} events", m.stats.total_messages(), m.stats.events);
                println!("peak bookkeeping: {} bytes", m.peak_footprint_bytes);
                if let Some(a) = &m.audit {
                    println!("audit: approved {}, matches ballots {}", a.approved, a.matches_ground_truth);
                }
                for v in &e.violations {
                    println!("VIOLATION {v:?}");
                }
            });
            verdict(m.ok())
        }
        Simulate::Sweep { f, latency, seeds, seed } => {
            if f.contains(&0) || latency.is_empty() || seeds == 0 {
                return crate::fail("sweep needs f >= 1, a latency and at least one seed");
            }
            let report = match sweep(&ScenarioSpec::new(4, seed), &f, &latency, seeds) {
                Ok(r) => r,
                Err(e) => return crate::fail(e),
            };
            emit(json, &report, |r| {
                println!("{:>3} {:>3} {:>9} {:>11} {:>11} {:>11} {:>12}", "f", "n", "link_ms", "mean_ms", "p95_ms", "messages", "peak_bytes");
                for p in &r.points {
                    println!(
                        "{:>3} {:>3} {:>9.1} {:>11.1} {:>11.1} {:>11.0} {:>12}",
                        p.f, p.n, p.link_ms, p.mean_ms, p.p95_ms, p.mean_messages, p.peak_footprint_bytes
                    );
                }
                for (f, ratio) in &r.ratios {
                    println!("f = {f}: slow/fast latency ratio {ratio:.2}");
                }
                println!("ratio strictly decreasing: {}", r.ratio_strictly_decreasing);
                println!(
                    "messages ~ {:.2} n^3 (fitted exponent {:.2}, worst deviation {:.2}x)",
                    r.messages.c, r.messages.exponent, r.messages.worst_factor
                );
            });
            APPROVED
        }
        Simulate::Explore { primitive, behavior, n, schedules, seed } => {
            if n == 0 {
                return crate::fail("n must be at least 1");
            }
            let f = (n - 1) / 3;
            if behavior.is_some() && f == 0 {
                return crate::fail("a Byzantine node needs n >= 4");
            }
            let report = explore_primitive::<Fast61>(primitive.into(), n, f, behavior, schedules, seed);
            emit(json, &report, |r| {
                println!("{} schedules, {} messages, {} violations", r.runs, r.messages, r.violations.len());
                for v in &r.violations {
                    println!("schedule {}: {} broken", v.schedule, v.property);
                    for line in &v.trace {
                        println!("    {line}");
                    }
                }
            });
            verdict(report.violations.is_empty())
        }
        Simulate::Behaviors { n, seeds, seed } => {
            if n.iter().any(|&n| n < 4) {
                return crate::fail("behaviour sweeps need n >= 4");
            }
            let report = match behavior_sweep(&n, seeds, seed) {
                Ok(r) => r,
                Err(e) => return crate::fail(e),
            };
            emit(json, &report, |r| {
                println!(
                    "{} runs ({} synchronous), {} decided, {} correct ballots excluded, {} failures",
                    r.runs,
                    r.synchronous_runs,
                    r.decided,
                    r.correct_excluded,
                    r.failures.len()
                );
                for fl in &r.failures {
                    println!("n = {} {} {:?} {:?} seed {}: {:?}", fl.n, fl.behavior, fl.policy, fl.regime, fl.seed, fl.violation);
                }
            });
            verdict(report.failures.is_empty())
        }
        Simulate::Secrecy { seed } => {
            let report = enumerate_secrecy(seed);
            emit(json, &report, |r| {
                println!("{} settings, {} equal-tally pairs indistinguishable: {}", r.settings, r.equal_tally_pairs, r.leaks.is_empty());
                println!("{} unequal-tally pairs, {} hidden", r.unequal_tally_pairs, r.unequal_tally_hidden);
                println!("control coalitions leaking: {}/{}", r.control_leaks_detected, r.control_settings);
                for l in &r.leaks {
                    println!("LEAK {l}");
                }
            });
            verdict(report.ok())
        }
    }
}
