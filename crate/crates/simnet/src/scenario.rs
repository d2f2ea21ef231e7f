//! Scenario files and single-run execution.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! n = 4                     # voters; f defaults to (n - 1) / 3
//! seed = 7
//! group = "fast61"          # fast61 | tiny83 | ristretto255
//! latency = { kind = "fixed", ms = 40.0 }
//! gst_step = 0              # events before the network stabilizes
//! weights = [1, 1, 1, 1]    # default: all 1
//! threshold = "1/2"
//! timeout_ms = 2000
//! emergency = false
//! audit = false             # audit the election afterwards
//! policy = "yes"            # default voter policy: yes | no | abstain | random
//!
//! [[voters]]                # per-voter policy overrides
//! voter = 2
//! policy = { think = { ms = 500, vote = false } }
//!
//! [[adversary]]
//! voter = 4
//! behavior = "INVALID_VOTE(2)"
//! ```

use std::collections::BTreeMap;

use privocracy_core::voting::{AuditResult, DelegationEdge, Proposal, Purpose};
use privocracy_core::Fraction;
use privocracy_crypto::{Fast61, Group, Ristretto255, Tiny83};
use serde::{Deserialize, Serialize};

use crate::adversary::Behavior;
use crate::analysis::{analyze, ElectionReport, Expectations};
use crate::model::{CostModel, LatencyModel, NetworkModel};
use crate::policy::Policy;
use crate::world::{Stats, VoterSpec, World, WorldError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupChoice {
    #[default]
    Fast61,
    Tiny83,
    Ristretto255,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoterOverride {
    pub voter: u32,
    pub policy: Policy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub voter: u32,
    #[serde(with = "behavior_string")]
    pub behavior: Behavior,
}

mod behavior_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::adversary::Behavior;

    pub fn serialize<S: Serializer>(b: &Behavior, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(b)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Behavior, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_threshold() -> Fraction {
    Fraction::new(1, 2)
}

fn default_timeout() -> u64 {
    2_000
}

fn default_pre_gst() -> f64 {
    2_000.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n: usize,
    #[serde(default)]
    pub f: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub group: GroupChoice,
    #[serde(default)]
    pub latency: LatencyModel,
    #[serde(default)]
    pub gst_step: u64,
    #[serde(default = "default_pre_gst")]
    pub pre_gst_max_ms: f64,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default)]
    pub weights: Option<Vec<u64>>,
    #[serde(default = "default_threshold")]
    pub threshold: Fraction,
    #[serde(default = "Fraction::one")]
    pub max_weight: Fraction,
    #[serde(default)]
    pub delegation: Vec<DelegationEdge>,
    #[serde(default)]
    pub emergency: bool,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub audit: bool,
    /// Voters that crash after the election, before an audit.
    #[serde(default)]
    pub withhold_logs: Vec<u32>,
    #[serde(default = "default_policy")]
    pub policy: Policy,
    #[serde(default)]
    pub voters: Vec<VoterOverride>,
    #[serde(default)]
    pub adversary: Vec<AdversarySpec>,
}

fn default_policy() -> Policy {
    Policy::Yes
}

impl ScenarioSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        ScenarioSpec {
            n,
            f: None,
            seed,
            group: GroupChoice::default(),
            latency: LatencyModel::default(),
            gst_step: 0,
            pre_gst_max_ms: default_pre_gst(),
            cost: CostModel::default(),
            weights: None,
            threshold: default_threshold(),
            max_weight: Fraction::one(),
            delegation: Vec::new(),
            emergency: false,
            timeout_ms: default_timeout(),
            audit: false,
            withhold_logs: Vec::new(),
            policy: Policy::Yes,
            voters: Vec::new(),
            adversary: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios serialize")
    }

    pub fn f(&self) -> usize {
        self.f.unwrap_or(self.n.saturating_sub(1) / 3)
    }

    pub fn policy_of(&self, voter: u32) -> Policy {
        self.voters.iter().rev().find(|o| o.voter == voter).map_or(self.policy, |o| o.policy)
    }

    pub fn voter_specs(&self) -> Vec<VoterSpec> {
        (1..=self.n as u32)
            .map(|i| VoterSpec {
                policy: self.policy_of(i),
                behavior: self.adversary.iter().find(|a| a.voter == i).map(|a| a.behavior),
            })
            .collect()
    }

    pub fn proposal(&self) -> Proposal {
        Proposal {
            issuer: "simnet".into(),
            command: "simulated command".into(),
            purpose: Purpose::Command,
            emergency: self.emergency,
            weights: self.weights.clone().unwrap_or_else(|| vec![1; self.n]),
            threshold: self.threshold,
            delegation: self.delegation.clone(),
            max_weight: self.max_weight,
            timeout_ms: self.timeout_ms,
        }
    }

    pub fn network(&self) -> NetworkModel {
        NetworkModel { latency: self.latency, gst_step: self.gst_step, pre_gst_max_ms: self.pre_gst_max_ms }
    }

    /// Whether synchronous validity is owed: a stable network from the
    /// start and every correct voter casting well before the timeout.
    pub fn expects_synchrony(&self) -> bool {
        let slow = (1..=self.n as u32).any(|i| match self.policy_of(i) {
            Policy::Abstain => true,
            Policy::Think { ms, .. } => ms * 2 >= self.timeout_ms,
            _ => false,
        } && !self.adversary.iter().any(|a| a.voter == i));
        self.gst_step == 0 && !slow && self.latency.delta_us() * 40 < self.timeout_ms * 1000
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub approved: bool,
    pub result: Option<AuditResult>,
    /// Recovered votes equal the plaintext ballots of every origin that
    /// shared a single ballot.
    pub matches_ground_truth: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMetrics {
    pub n: usize,
    pub f: usize,
    pub seed: u64,
    pub election: ElectionReport,
    pub model_time_ms: f64,
    pub stats: Stats,
    pub peak_footprint_bytes: usize,
    pub audit: Option<AuditReport>,
}

impl RunMetrics {
    pub fn ok(&self) -> bool {
        self.election.ok() && self.audit.as_ref().map_or(true, |a| a.matches_ground_truth)
    }
}

pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunMetrics, ScenarioError> {
    match spec.group {
        GroupChoice::Fast61 => run_in::<Fast61>(spec),
        GroupChoice::Tiny83 => run_in::<Tiny83>(spec),
        GroupChoice::Ristretto255 => run_in::<Ristretto255>(spec),
    }
}

pub fn run_in<G: Group>(spec: &ScenarioSpec) -> Result<RunMetrics, ScenarioError> {
    let f = spec.f();
    let mut world = World::<G>::new(f, spec.seed, &spec.voter_specs(), spec.network(), spec.cost)?;
    let id = world.issue(spec.proposal())?;
    let end = world.run();
    let report = analyze(&world, id, 0, end, Expectations { synchronous: spec.expects_synchrony() });
    let model_time_ms = world.now() as f64 / 1000.0;

    let audit = if spec.audit {
        for v in &spec.withhold_logs {
            world.crash_now(*v)?;
        }
        let aid = world.issue_audit(id, spec.timeout_ms)?;
        world.run();
        let approved = world.daemon().decision(aid).is_some_and(|d| d.approved);
        let result = world.daemon().audit_result(aid).cloned();
        let truth: BTreeMap<u32, u64> = report.votes.clone();
        let matches_ground_truth = match &result {
            Some(r) => {
                let got: BTreeMap<u32, u64> = r.votes.iter().map(|(p, v)| (p.0, *v)).collect();
                truth.iter().all(|(o, v)| got.get(o).map_or(!dealt(&world, *o, id), |g| g == v))
                    && got.keys().all(|o| truth.contains_key(o) || !world.is_correct(*o))
            }
            None => !approved,
        };
        Some(AuditReport { approved, result, matches_ground_truth })
    } else {
        None
    };

    Ok(RunMetrics {
        n: spec.n,
        f,
        seed: spec.seed,
        election: report,
        model_time_ms,
        peak_footprint_bytes: world.stats.peak_footprint.iter().copied().max().unwrap_or(0),
        stats: world.stats.clone(),
        audit,
    })
}

/// Whether some correct voter logged a share from `origin`.
fn dealt<G: Group>(world: &World<G>, origin: u32, election: privocracy_core::ElectionId) -> bool {
    (1..=world.n() as u32)
        .filter(|i| world.is_correct(*i))
        .any(|i| world.voter(i).share_log(election).iter().any(|e| e.origin.0 == origin))
}
