//! Byzantine and faulty voter behaviours.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "behavior", rename_all = "snake_case")]
pub enum Behavior {
    /// Correct until the simulator has processed `step` events, then gone.
    CrashAt { step: u64 },
    /// Never sends anything.
    Silent,
    /// Runs two personas with opposite votes, each talking to half of the
    /// other voters.
    Equivocate,
    /// Shares `value` with the binary proof's guard bypassed.
    InvalidVote { value: u64 },
    /// Sends corrupted rows to `f` victims, garbage recovery points and a
    /// forged partial tally.
    InvalidShares,
    /// Correct, but every outgoing message is held back by up to `extra_ms`.
    DelayAll { extra_ms: u64 },
}

impl Behavior {
    /// One representative of each behaviour, for sweeps.
    pub fn catalog(crash_step: u64, delay_ms: u64) -> Vec<Behavior> {
        vec![
            Behavior::CrashAt { step: crash_step },
            Behavior::Silent,
            Behavior::Equivocate,
            Behavior::InvalidVote { value: 2 },
            Behavior::InvalidShares,
            Behavior::DelayAll { extra_ms: delay_ms },
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Behavior::CrashAt { .. } => "CRASH_AT",
            Behavior::Silent => "SILENT",
            Behavior::Equivocate => "EQUIVOCATE",
            Behavior::InvalidVote { .. } => "INVALID_VOTE",
            Behavior::InvalidShares => "INVALID_SHARES",
            Behavior::DelayAll { .. } => "DELAY_ALL",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Behavior::CrashAt { step } => write!(f, "CRASH_AT({step})"),
            Behavior::InvalidVote { value } => write!(f, "INVALID_VOTE({value})"),
            Behavior::DelayAll { extra_ms } => write!(f, "DELAY_ALL({extra_ms})"),
            b => f.write_str(b.name()),
        }
    }
}

impl FromStr for Behavior {
    type Err = String;

    /// Parses `SILENT`, `CRASH_AT(120)`, `invalid_vote(2)`, `DELAY_ALL(500)`...
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (name, arg) = match s.split_once('(') {
            Some((n, rest)) => {
                let arg = rest.strip_suffix(')').ok_or_else(|| format!("missing ')' in {s:?}"))?;
                (n.trim(), Some(arg.trim().parse::<u64>().map_err(|e| format!("{s:?}: {e}"))?))
            }
            None => (s, None),
        };
        let need = |a: Option<u64>| a.ok_or_else(|| format!("{name} needs an argument"));
        match name.to_ascii_uppercase().as_str() {
            "CRASH_AT" => Ok(Behavior::CrashAt { step: need(arg)? }),
            "SILENT" => Ok(Behavior::Silent),
            "EQUIVOCATE" => Ok(Behavior::Equivocate),
            "INVALID_VOTE" => Ok(Behavior::InvalidVote { value: arg.unwrap_or(2) }),
            "INVALID_SHARES" => Ok(Behavior::InvalidShares),
            "DELAY_ALL" => Ok(Behavior::DelayAll { extra_ms: need(arg)? }),
            _ => Err(format!("unknown behavior {name:?}")),
        }
    }
}
