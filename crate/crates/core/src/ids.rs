use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

/// A voter's index in `1..=n`; it doubles as its Shamir evaluation point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Group size and fault bound, from the point of view of one process.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Membership {
    pub n: usize,
    pub f: usize,
    pub me: ProcessId,
}

impl Membership {
    pub fn new(n: usize, f: usize, me: ProcessId) -> Self {
        assert!(n >= 3 * f + 1, "n={n} cannot tolerate f={f}");
        assert!(me.0 >= 1 && me.0 as usize <= n, "process id {me} outside 1..={n}");
        Membership { n, f, me }
    }

    pub fn ids(&self) -> impl Iterator<Item = ProcessId> {
        (1..=self.n as u32).map(ProcessId)
    }

    pub fn contains(&self, p: ProcessId) -> bool {
        p.0 >= 1 && p.0 as usize <= self.n
    }

    /// `ceil((n + f + 1) / 2)`.
    pub fn echo_quorum(&self) -> usize {
        (self.n + self.f + 2) / 2
    }
}

/// Random 128-bit election identifier, rendered as 32 hex digits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElectionId(pub [u8; 16]);

impl ElectionId {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut b = [0u8; 16];
        rng.fill_bytes(&mut b);
        ElectionId(b)
    }
}

impl fmt::Display for ElectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for ElectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ElectionId({self})")
    }
}

impl FromStr for ElectionId {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut b = [0u8; 16];
        hex::decode_to_slice(s, &mut b)?;
        Ok(ElectionId(b))
    }
}

impl Serialize for ElectionId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElectionId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The agreement lane an ABA instance belongs to. Normal elections use
/// one lane; emergency elections run `Early` and `Late` side by side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lane {
    Normal,
    Early,
    Late,
}

impl Lane {
    pub fn as_str(self) -> &'static str {
        match self {
            Lane::Normal => "normal",
            Lane::Early => "early",
            Lane::Late => "late",
        }
    }
}

/// Which primitive an instance runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    /// Reliable broadcast of a ballot's IsBinary proof.
    Proof,
    Avss,
    Aba(Lane),
}

/// `(election, kind, originator)`: the key of every primitive instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceTag {
    pub election: ElectionId,
    pub kind: PrimitiveKind,
    pub originator: ProcessId,
}

impl InstanceTag {
    /// Stable bytes used to domain-separate the common coin.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.election.0.to_vec();
        out.extend(match self.kind {
            PrimitiveKind::Proof => [0u8, 0],
            PrimitiveKind::Avss => [1, 0],
            PrimitiveKind::Aba(Lane::Normal) => [2, 0],
            PrimitiveKind::Aba(Lane::Early) => [2, 1],
            PrimitiveKind::Aba(Lane::Late) => [2, 2],
        });
        out.extend(self.originator.0.to_le_bytes());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quorums() {
        let m = Membership::new(4, 1, ProcessId(1));
        assert_eq!(m.echo_quorum(), 3);
        let m = Membership::new(7, 2, ProcessId(1));
        assert_eq!(m.echo_quorum(), 5);
        let m = Membership::new(5, 1, ProcessId(1));
        assert_eq!(m.echo_quorum(), 4);
    }

    #[test]
    fn election_id_round_trip() {
        let id = ElectionId([0xab; 16]);
        let s = serde_json::to_string(&id).unwrap();
        assert_eq!(s, format!("\"{}\"", "ab".repeat(16)));
        assert_eq!(serde_json::from_str::<ElectionId>(&s).unwrap(), id);
        assert!("zz".parse::<ElectionId>().is_err());
    }
}
