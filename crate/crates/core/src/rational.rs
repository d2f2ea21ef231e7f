use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// An exact non-negative fraction, used for thresholds and caps so that
/// no decision ever depends on floating point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(Ratio<u64>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid fraction {0:?}: expected a decimal like 0.5 or a ratio like 1/2")]
pub struct ParseFractionError(String);

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        Fraction(Ratio::new(num, den))
    }

    pub fn one() -> Self {
        Fraction::new(1, 1)
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    /// True for `0 < self <= 1`.
    pub fn is_unit_interval(&self) -> bool {
        self.numer() > 0 && self.numer() <= self.denom()
    }

    /// `value >= self * of`, exactly.
    pub fn met_by(&self, value: u64, of: u64) -> bool {
        value as u128 * self.denom() as u128 >= self.numer() as u128 * of as u128
    }

    /// `value <= self * of`, exactly.
    pub fn admits(&self, value: u64, of: u64) -> bool {
        value as u128 * self.denom() as u128 <= self.numer() as u128 * of as u128
    }

    /// `(1 + self) / 2`.
    pub fn halfway_to_one(&self) -> Self {
        Fraction(Ratio::new(self.denom() + self.numer(), 2 * self.denom()))
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl FromStr for Fraction {
    type Err = ParseFractionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseFractionError(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| err())?;
            let d: u64 = d.trim().parse().map_err(|_| err())?;
            if d == 0 {
                return Err(err());
            }
            return Ok(Fraction::new(n, d));
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() || frac.len() > 18 {
            return Err(err());
        }
        let digits = |x: &str| x.is_empty() || x.bytes().all(|b| b.is_ascii_digit());
        if !digits(int) || !digits(frac) {
            return Err(err());
        }
        let den = 10u64.checked_pow(frac.len() as u32).ok_or_else(err)?;
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| err())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
        let num = int.checked_mul(den).and_then(|x| x.checked_add(frac)).ok_or_else(err)?;
        Ok(Fraction::new(num, den))
    }
}

impl Serialize for Fraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            // Shortest round-trip formatting recovers the literal as written.
            Raw::Float(x) => format!("{x}").parse().map_err(serde::de::Error::custom),
        }
    }
}
