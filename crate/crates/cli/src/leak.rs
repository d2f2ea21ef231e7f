//! `privocracy leakage`: what an observer of plaintext tallies learns.
//!
//! Observations come from a text file or are generated from a known vote
//! vector. The file format is line based; `#` starts a comment:
//!
//! ```text
//! f 1
//! weights 1 2 4 8
//! tally 5
//! tally 7 sum 15      # the observer also saw the accepted weight
//! weights 2 2 4 8     # later rounds use new weights
//! tally 6
//! ```

use std::path::PathBuf;

use clap::Args;
use privocracy_core::leakage::{leakage_bound, LeakageReport, ObservationRound};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::APPROVED;

#[derive(Args, Debug)]
pub struct LeakageArgs {
    /// Observation file (see the module docs for the format).
    #[arg(long, conflicts_with_all = ["weights", "votes"])]
    pub observations: Option<PathBuf>,
    /// Voter weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<u64>,
    /// The true votes as a 0/1 string, voter 1 first; tallies are simulated.
    #[arg(long, requires = "weights")]
    pub votes: Option<String>,
    /// Fault budget; defaults to (n - 1) / 3.
    #[arg(long)]
    pub f: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub rounds: usize,
    /// Reveal the accepted weight in each simulated round.
    #[arg(long)]
    pub weight_sum: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Default, PartialEq)]
pub struct Observations {
    pub f: Option<usize>,
    pub rounds: Vec<ObservationRound>,
}

pub fn parse_observations(text: &str) -> Result<Observations, String> {
    let mut out = Observations::default();
    let mut weights: Option<Vec<u64>> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: &str| format!("line {}: {m}", i + 1);
        let mut words = line.split_whitespace();
        let key = words.next().unwrap_or("");
        let nums: Vec<&str> = words.collect();
        let int = |s: &str| s.parse::<u64>().map_err(|_| err(&format!("{s:?} is not a non-negative integer")));
        match key {
            "f" => {
                let [v] = nums[..] else { return Err(err("expected `f <int>`")) };
                out.f = Some(int(v)? as usize);
            }
            "weights" => {
                if nums.is_empty() {
                    return Err(err("no weights"));
                }
                weights = Some(nums.iter().map(|s| int(s)).collect::<Result<_, _>>()?);
            }
            "tally" => {
                let w = weights.clone().ok_or_else(|| err("tally before any weights line"))?;
                let (tally, weight_sum) = match nums[..] {
                    [t] => (int(t)?, None),
                    [t, "sum", s] => (int(t)?, Some(int(s)?)),
                    _ => return Err(err("expected `tally <int> [sum <int>]`")),
                };
                out.rounds.push(ObservationRound { tally, weights: w, weight_sum });
            }
            other => return Err(err(&format!("unknown keyword {other:?}"))),
        }
    }
    if out.rounds.is_empty() {
        return Err("no tally lines".into());
    }
    Ok(out)
}

/// Tallies of `votes` over `rounds` elections, each accepting a random set
/// of at least n - f voters.
pub fn simulate_rounds(weights: &[u64], votes: &[bool], f: usize, rounds: usize, reveal_sum: bool, seed: u64) -> Vec<ObservationRound> {
    let n = weights.len();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..rounds)
        .map(|_| {
            let size = rng.gen_range(n - f..=n);
            let accepted = sample(&mut rng, n, size);
            let tally = accepted.iter().filter(|&i| votes[i]).map(|i| weights[i]).sum();
            let sum = accepted.iter().map(|i| weights[i]).sum();
            ObservationRound { tally, weights: weights.to_vec(), weight_sum: reveal_sum.then_some(sum) }
        })
        .collect()
}

fn print(r: &LeakageReport) {
    println!("n = {}, f = {}", r.n, r.f);
    println!("{:>5} {:>12} {:>12} {:>16}", "round", "round_bits", "total_bits", "compatible");
    for i in 0..r.per_round_bits.len() {
        println!("{:>5} {:>12.3} {:>12.3} {:>16}", i + 1, r.per_round_bits[i], r.cumulative_bits[i], r.compatible[i]);
    }
    println!("saturated: {}", r.saturated);
    match r.r_max {
        Some(k) => println!("rounds that shrank the compatible set: {k}"),
        None => println!("rounds that shrank the compatible set: none"),
    }
    for c in &r.anonymity_classes {
        println!("weight {}: voters {:?} are {}-anonymous", c.weight, c.members, c.k);
    }
}

pub fn run(args: LeakageArgs, json: bool) -> i32 {
    let (rounds, f) = match build(&args) {
        Ok(x) => x,
        Err(e) => return crate::fail(e),
    };
    let n = rounds[0].weights.len();
    match leakage_bound(&rounds, n, f) {
        Ok(report) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                print(&report);
            }
            APPROVED
        }
        Err(e) => crate::fail(e),
    }
}

fn build(args: &LeakageArgs) -> Result<(Vec<ObservationRound>, usize), String> {
    let default_f = |n: usize| n.saturating_sub(1) / 3;
    if let Some(path) = &args.observations {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let obs = parse_observations(&text)?;
        let n = obs.rounds[0].weights.len();
        return Ok((obs.rounds, args.f.or(obs.f).unwrap_or_else(|| default_f(n))));
    }
    let votes = args.votes.as_deref().ok_or("give --observations FILE or --weights W --votes BITS")?;
    let votes: Vec<bool> = votes
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(format!("--votes must be a 0/1 string, got {c:?}")),
        })
        .collect::<Result<_, _>>()?;
    if votes.len() != args.weights.len() {
        return Err(format!("{} votes for {} weights", votes.len(), args.weights.len()));
    }
    let f = args.f.unwrap_or_else(|| default_f(votes.len()));
    if f >= votes.len() {
        return Err(format!("f = {f} leaves no voters"));
    }
    if args.rounds == 0 {
        return Err("--rounds must be positive".into());
    }
    Ok((simulate_rounds(&args.weights, &votes, f, args.rounds, args.weight_sum, args.seed), f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_file() {
        let text = "# two rounds\nf 1\nweights 1 2 4\ntally 5\n\nweights 1 1 4 # changed\ntally 4 sum 6\n";
        let obs = parse_observations(text).unwrap();
        assert_eq!(obs.f, Some(1));
        assert_eq!(
            obs.rounds,
            vec![
                ObservationRound { tally: 5, weights: vec![1, 2, 4], weight_sum: None },
                ObservationRound { tally: 4, weights: vec![1, 1, 4], weight_sum: Some(6) },
            ]
        );
        for bad in ["tally 3", "weights 1 x", "f", "tally", "weights 1\ntally 1 total 2", "vote 1", ""] {
            assert!(parse_observations(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn simulated_tallies_are_consistent_with_the_votes() {
        let weights = [1, 2, 4, 8];
        let votes = [true, false, true, true];
        let rounds = simulate_rounds(&weights, &votes, 1, 50, true, 9);
        for r in &rounds {
            let sum = r.weight_sum.unwrap();
            assert!(r.tally <= 13 && r.tally <= sum && sum >= 15 - 8);
        }
        // With f = 0 everyone is counted.
        assert!(simulate_rounds(&weights, &votes, 0, 5, false, 1).iter().all(|r| r.tally == 13 && r.weight_sum.is_none()));
    }

    #[test]
    fn powers_of_two_pin_the_votes_in_one_round() {
        let rounds = simulate_rounds(&[1, 2, 4, 8, 16], &[true, false, false, true, true], 0, 1, false, 3);
        let r = leakage_bound(&rounds, 5, 0).unwrap();
        assert_eq!(r.compatible, vec![1]);
        assert_eq!(r.cumulative_bits, vec![5.0]);
    }
}
