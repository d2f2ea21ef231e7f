use privocracy_crypto::{Group, Scalar};
use serde::{Deserialize, Serialize};

use crate::ids::{ElectionId, ProcessId};
use crate::rational::Fraction;
use crate::voting::delegation::DelegationEdge;
use crate::Error;

/// What an election authorizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Purpose {
    Command,
    /// Disclose the logged shares of election `op`.
    Audit { op: ElectionId },
}

/// Everything voters need to run one election; sent with `Propose`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub issuer: String,
    pub command: String,
    pub purpose: Purpose,
    pub emergency: bool,
    /// `weights[i - 1]` is voter `i`'s weight.
    pub weights: Vec<u64>,
    pub threshold: Fraction,
    #[serde(default)]
    pub delegation: Vec<DelegationEdge>,
    pub max_weight: Fraction,
    pub timeout_ms: u64,
}

impl Proposal {
    pub fn weight(&self, p: ProcessId) -> u64 {
        self.weights.get(p.0 as usize - 1).copied().unwrap_or(0)
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().sum()
    }

    /// Checks the configuration invariants for an `n`-voter group over `G`.
    pub fn validate<G: Group>(&self, n: usize) -> Result<(), Error> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.weights.len() != n {
            return bad(format!("expected {n} weights, got {}", self.weights.len()));
        }
        let total = self
            .weights
            .iter()
            .try_fold(0u64, |a, w| a.checked_add(*w))
            .ok_or_else(|| Error::InvalidConfig("weight sum overflows".into()))?;
        if total == 0 {
            return bad("total weight must be positive".into());
        }
        if !G::Scalar::below_order(total) {
            return bad(format!("total weight {total} is not below the group order"));
        }
        if !self.threshold.is_unit_interval() {
            return bad(format!("threshold {} outside (0, 1]", self.threshold));
        }
        if !self.max_weight.is_unit_interval() {
            return bad(format!("max weight {} outside (0, 1]", self.max_weight));
        }
        for e in &self.delegation {
            if e.from == e.to {
                return bad(format!("self-delegation by voter {}", e.from));
            }
            for p in [e.from, e.to] {
                if p.0 == 0 || p.0 as usize > n {
                    return bad(format!("delegation references unknown voter {p}"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use privocracy_crypto::Tiny83;

    use super::*;

    pub(crate) fn sample() -> Proposal {
        Proposal {
            issuer: "usr".into(),
            command: "cat file.txt".into(),
            purpose: Purpose::Command,
            emergency: false,
            weights: vec![5, 3],
            threshold: Fraction::new(1, 2),
            delegation: vec![DelegationEdge { from: ProcessId(1), to: ProcessId(2), trust: 5 }],
            max_weight: Fraction::new(3, 10),
            timeout_ms: 300_000,
        }
    }

    #[test]
    fn validation() {
        let p = sample();
        assert!(p.validate::<Tiny83>(2).is_ok());
        assert!(p.validate::<Tiny83>(3).is_err());

        let mut q = p.clone();
        q.threshold = Fraction::new(0, 1);
        assert!(q.validate::<Tiny83>(2).is_err());

        let mut q = p.clone();
        q.weights = vec![50, 33];
        assert!(q.validate::<Tiny83>(2).is_err());
        q.weights = vec![50, 32];
        assert!(q.validate::<Tiny83>(2).is_ok());

        let mut q = p.clone();
        q.weights = vec![0, 0];
        assert!(q.validate::<Tiny83>(2).is_err());

        let mut q = p;
        q.delegation[0].to = ProcessId(1);
        assert!(q.validate::<Tiny83>(2).is_err());
    }
}
