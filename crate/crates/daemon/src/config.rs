//! Daemon configuration: the voter roster and per-issuer election rules.
//!
//! ```toml
//! group = "ristretto255"
//!
//! [[voters]]
//! name = "voter1"
//!
//! [[voters]]
//! name = "voter2"
//! address = "10.0.0.2:7900"   # runs as a separate privocracy-voter process
//!
//! [[elections]]
//! issuer = "*"
//! resource = "systemctl *"
//! weights = [["voter1", 5], ["voter2", 3]]
//! threshold = 0.5
//! delegation = [["voter1", "voter2", 5]]
//! max_weight = 0.3
//! timeout = "300s"
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::str::FromStr;

use privocracy_core::voting::{DelegationEdge, Proposal, Purpose};
use privocracy_core::{Fraction, ProcessId};
use privocracy_crypto::Group;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("no election rule matches issuer {issuer:?} and command {command:?}")]
    NoMatch { issuer: String, command: String },
    #[error("resolver hook failed: {0}")]
    Hook(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupName {
    Tiny83,
    Sound16,
    Fast61,
    #[default]
    Ristretto255,
}

/// How a voter node decides when no human is in the loop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VotePolicy {
    /// Votes arrive through `POST /elections/{id}/vote`.
    #[default]
    Interactive,
    Approve,
    Reject,
    /// Never votes; its weight moves along its delegation edges.
    Abstain,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoterEntry {
    pub name: String,
    /// Peer address of a voter running in its own process. Voters without
    /// one run inside the daemon.
    #[serde(default)]
    pub address: Option<String>,
    #[serde(default)]
    pub policy: VotePolicy,
}

/// A duration written as integer seconds or a string such as `"300s"`,
/// `"1500ms"` or `"5m"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Timeout(pub u64);

impl FromStr for Timeout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
        let (digits, unit) = s.split_at(split);
        let v: u64 = digits.parse().map_err(|_| format!("bad duration {s:?}"))?;
        let scale = match unit.trim() {
            "ms" => 1,
            "" | "s" => 1_000,
            "m" => 60_000,
            "h" => 3_600_000,
            u => return Err(format!("unknown duration unit {u:?}")),
        };
        v.checked_mul(scale).map(Timeout).ok_or_else(|| format!("duration {s:?} overflows"))
    }
}

impl<'de> Deserialize<'de> for Timeout {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Secs(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Secs(s) => s.checked_mul(1_000).map(Timeout).ok_or_else(|| serde::de::Error::custom("timeout overflows")),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for Timeout {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}ms", self.0))
    }
}

fn any() -> String {
    "*".into()
}

fn default_timeout() -> Timeout {
    Timeout(300_000)
}

/// One election rule as written in the config file or returned by a
/// resolver hook.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleEntry {
    #[serde(default = "any")]
    pub issuer: String,
    /// Glob over the command line.
    #[serde(default = "any")]
    pub resource: String,
    pub weights: Vec<(String, u64)>,
    pub threshold: Fraction,
    #[serde(default)]
    pub delegation: Vec<(String, String, u64)>,
    #[serde(default = "Fraction::one")]
    pub max_weight: Fraction,
    #[serde(default = "default_timeout")]
    pub timeout: Timeout,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaemonConfig {
    #[serde(default)]
    pub group: GroupName,
    /// Fault budget; defaults to the largest f with n ≥ 3f + 1.
    #[serde(default)]
    pub f: Option<usize>,
    /// Seed of the common coin shared by all voters.
    #[serde(default)]
    pub coin_seed: u64,
    /// Where the daemon accepts voter traffic. Needed only when some voter
    /// runs in its own process.
    #[serde(default)]
    pub peer_address: Option<String>,
    /// External program consulted before the rules: invoked with the
    /// issuer and command, it prints one rule as JSON.
    #[serde(default)]
    pub resolver: Option<Vec<String>>,
    pub voters: Vec<VoterEntry>,
    #[serde(default)]
    pub elections: Vec<RuleEntry>,
}

impl DaemonConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        text.parse()
    }

    pub fn n(&self) -> usize {
        self.voters.len()
    }

    pub fn fault_budget(&self) -> usize {
        self.f.unwrap_or(self.voters.len().saturating_sub(1) / 3)
    }

    pub fn voter_id(&self, name: &str) -> Option<ProcessId> {
        self.voters.iter().position(|v| v.name == name).map(|i| ProcessId(i as u32 + 1))
    }

    pub fn voter_name(&self, p: ProcessId) -> &str {
        &self.voters[p.0 as usize - 1].name
    }

    /// Structural checks that do not depend on the group.
    pub fn check(&self) -> Result<(), ConfigError> {
        let n = self.n();
        if n == 0 {
            return invalid("at least one voter is required");
        }
        let f = self.fault_budget();
        if n < 3 * f + 1 {
            return invalid(format!("{n} voters cannot tolerate f = {f}"));
        }
        let mut seen = BTreeMap::new();
        for v in &self.voters {
            if v.name.is_empty() || seen.insert(v.name.as_str(), ()).is_some() {
                return invalid(format!("voter name {:?} is empty or repeated", v.name));
            }
        }
        if self.voters.iter().any(|v| v.address.is_some()) && self.peer_address.is_none() {
            return invalid("peer_address is required when a voter has an address");
        }
        Ok(())
    }

    /// Turns a rule into positional election parameters.
    pub fn compile(&self, rule: &RuleEntry) -> Result<ElectionConfig, ConfigError> {
        let id = |name: &str| {
            self.voter_id(name).ok_or_else(|| ConfigError::Invalid(format!("unknown voter {name:?}")))
        };
        let mut weights = vec![0; self.n()];
        for (name, w) in &rule.weights {
            let p = id(name)?;
            if weights[p.0 as usize - 1] != 0 {
                return invalid(format!("voter {name:?} weighted twice"));
            }
            weights[p.0 as usize - 1] = *w;
        }
        let delegation = rule
            .delegation
            .iter()
            .map(|(from, to, trust)| Ok(DelegationEdge { from: id(from)?, to: id(to)?, trust: *trust }))
            .collect::<Result<_, ConfigError>>()?;
        Ok(ElectionConfig {
            weights,
            threshold: rule.threshold,
            delegation,
            max_weight: rule.max_weight,
            timeout_ms: rule.timeout.0,
        })
    }
}

impl FromStr for DaemonConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: DaemonConfig = toml::from_str(s)?;
        cfg.check()?;
        Ok(cfg)
    }
}

/// Resolved parameters for one election, positional by voter id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElectionConfig {
    pub weights: Vec<u64>,
    pub threshold: Fraction,
    pub delegation: Vec<DelegationEdge>,
    pub max_weight: Fraction,
    pub timeout_ms: u64,
}

impl ElectionConfig {
    pub fn proposal(&self, issuer: &str, command: &str, emergency: bool) -> Proposal {
        Proposal {
            issuer: issuer.into(),
            command: command.into(),
            purpose: Purpose::Command,
            emergency,
            weights: self.weights.clone(),
            threshold: self.threshold,
            delegation: self.delegation.clone(),
            max_weight: self.max_weight,
            timeout_ms: self.timeout_ms,
        }
    }

    /// The range checks every election must pass in group `G`.
    pub fn validate<G: Group>(&self) -> Result<(), ConfigError> {
        self.proposal("", "", false)
            .validate::<G>(self.weights.len())
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Maps an issuer and command to the election parameters that govern it.
pub trait ConfigResolver: Send {
    fn resolve(&self, issuer: &str, command: &str) -> Result<ElectionConfig, ConfigError>;
}

/// The default resolver: the first `[[elections]]` rule whose issuer and
/// resource pattern both match.
pub struct FileResolver {
    rules: Vec<(String, glob::Pattern, ElectionConfig)>,
}

impl FileResolver {
    pub fn new<G: Group>(cfg: &DaemonConfig) -> Result<Self, ConfigError> {
        let rules = cfg
            .elections
            .iter()
            .map(|r| {
                let pattern = glob::Pattern::new(&r.resource)
                    .map_err(|e| ConfigError::Invalid(format!("resource pattern {:?}: {e}", r.resource)))?;
                let compiled = cfg.compile(r)?;
                compiled.validate::<G>()?;
                Ok((r.issuer.clone(), pattern, compiled))
            })
            .collect::<Result<_, ConfigError>>()?;
        Ok(FileResolver { rules })
    }
}

impl ConfigResolver for FileResolver {
    fn resolve(&self, issuer: &str, command: &str) -> Result<ElectionConfig, ConfigError> {
        self.rules
            .iter()
            .find(|(i, pattern, _)| (i == "*" || i == issuer) && pattern.matches(command))
            .map(|(_, _, c)| c.clone())
            .ok_or_else(|| ConfigError::NoMatch { issuer: issuer.into(), command: command.into() })
    }
}

/// Asks an operator script first and falls back to `fallback` when the
/// script prints nothing.
pub struct HookResolver<R> {
    program: Vec<String>,
    cfg: DaemonConfig,
    fallback: R,
}

impl<R: ConfigResolver> HookResolver<R> {
    pub fn new(program: Vec<String>, cfg: DaemonConfig, fallback: R) -> Result<Self, ConfigError> {
        if program.is_empty() {
            return invalid("resolver hook needs a program");
        }
        Ok(HookResolver { program, cfg, fallback })
    }
}

impl<R: ConfigResolver> ConfigResolver for HookResolver<R> {
    fn resolve(&self, issuer: &str, command: &str) -> Result<ElectionConfig, ConfigError> {
        let out = Command::new(&self.program[0])
            .args(&self.program[1..])
            .arg(issuer)
            .arg(command)
            .output()
            .map_err(|e| ConfigError::Hook(e.to_string()))?;
        if !out.status.success() {
            return Err(ConfigError::Hook(format!("exited with {}", out.status)));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        if text.trim().is_empty() {
            return self.fallback.resolve(issuer, command);
        }
        let rule: RuleEntry = serde_json::from_str(&text).map_err(|e| ConfigError::Hook(e.to_string()))?;
        self.cfg.compile(&rule)
    }
}

#[cfg(test)]
mod tests {
    use privocracy_crypto::{Fast61, Tiny83};

    use super::*;

    const TABLE: &str = r#"
        [[voters]]
        name = "voter1"
        [[voters]]
        name = "voter2"

        [[elections]]
        weights = [["voter1", 5], ["voter2", 3]]
        threshold = 0.5
        delegation = [["voter1", "voter2", 5]]
        max_weight = 0.3
        timeout = "300s"
    "#;

    #[test]
    fn example_rule_round_trips() {
        let cfg: DaemonConfig = TABLE.parse().unwrap();
        assert_eq!(cfg.fault_budget(), 0);
        let c = FileResolver::new::<Fast61>(&cfg).unwrap().resolve("alice", "cat file.txt").unwrap();
        assert_eq!(c.weights, vec![5, 3]);
        assert_eq!(c.threshold, Fraction::new(1, 2));
        assert_eq!(c.max_weight, Fraction::new(3, 10));
        assert_eq!(c.timeout_ms, 300_000);
        assert_eq!(c.delegation, vec![DelegationEdge { from: ProcessId(1), to: ProcessId(2), trust: 5 }]);

        let again: DaemonConfig = toml::to_string(&cfg).unwrap().parse().unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn threshold_zero_is_rejected() {
        let cfg: DaemonConfig = TABLE.replace("threshold = 0.5", "threshold = 0").parse().unwrap();
        assert!(matches!(FileResolver::new::<Fast61>(&cfg), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn weights_reaching_the_group_order_are_rejected() {
        let cfg: DaemonConfig = TABLE.replace("[\"voter2\", 3]", "[\"voter2\", 78]").parse().unwrap();
        assert!(matches!(FileResolver::new::<Tiny83>(&cfg), Err(ConfigError::Invalid(_))));
        let cfg: DaemonConfig = TABLE.replace("[\"voter2\", 3]", "[\"voter2\", 77]").parse().unwrap();
        assert!(FileResolver::new::<Tiny83>(&cfg).is_ok());
    }

    #[test]
    fn unknown_names_and_fields_are_errors() {
        let cfg: DaemonConfig = TABLE.replace("[\"voter2\", 3]", "[\"mallory\", 3]").parse().unwrap();
        assert!(FileResolver::new::<Fast61>(&cfg).is_err());
        assert!(TABLE.replace("timeout =", "timeuot =").parse::<DaemonConfig>().is_err());
        assert!(TABLE.replace("\"voter2\"\n", "\"voter1\"\n").parse::<DaemonConfig>().is_err());
    }

    #[test]
    fn first_matching_rule_wins() {
        let text = format!(
            "{TABLE}\n[[elections]]\nissuer = \"bob\"\nresource = \"rm *\"\nweights = [[\"voter1\", 1]]\nthreshold = \"1/1\"\n"
        )
        .replace("[[elections]]\n        weights", "[[elections]]\n        resource = \"cat *\"\n        weights");
        let cfg: DaemonConfig = text.parse().unwrap();
        let r = FileResolver::new::<Fast61>(&cfg).unwrap();
        assert_eq!(r.resolve("bob", "cat x").unwrap().weights, vec![5, 3]);
        assert_eq!(r.resolve("bob", "rm -rf /tmp/x").unwrap().weights, vec![1, 0]);
        assert!(matches!(r.resolve("alice", "rm x"), Err(ConfigError::NoMatch { .. })));
    }

    #[test]
    fn durations() {
        assert_eq!("1500ms".parse::<Timeout>().unwrap(), Timeout(1500));
        assert_eq!("5m".parse::<Timeout>().unwrap(), Timeout(300_000));
        assert_eq!("7".parse::<Timeout>().unwrap(), Timeout(7000));
        assert!("5 fortnights".parse::<Timeout>().is_err());
    }
}
