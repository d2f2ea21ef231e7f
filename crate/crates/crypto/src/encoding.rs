//! Canonical byte encodings and their hex-string serde form.

use crate::group::{Group, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("truncated input")]
    Truncated,
    #[error("trailing bytes after value")]
    Trailing,
    #[error("non-canonical scalar")]
    Scalar,
    #[error("not a group element")]
    Element,
    #[error("malformed: {0}")]
    Malformed(&'static str),
    #[error("invalid hex: {0}")]
    Hex(String),
}

/// Types with a single, canonical wire encoding.
pub trait Canonical: Sized {
    fn to_canonical(&self) -> Vec<u8>;
    fn from_canonical(bytes: &[u8]) -> Result<Self, DecodeError>;

    fn to_hex(&self) -> String {
        hex::encode(self.to_canonical())
    }

    fn from_hex(s: &str) -> Result<Self, DecodeError> {
        let bytes = hex::decode(s).map_err(|e| DecodeError::Hex(e.to_string()))?;
        Self::from_canonical(&bytes)
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn scalar<S: Scalar>(&mut self) -> Result<S, DecodeError> {
        S::from_bytes(self.take(S::ENCODED_LEN)?).ok_or(DecodeError::Scalar)
    }

    pub fn element<G: Group>(&mut self) -> Result<G::Element, DecodeError> {
        G::decode(self.take(G::ELEMENT_LEN)?).ok_or(DecodeError::Element)
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(DecodeError::Trailing)
        }
    }
}

macro_rules! serde_via_canonical {
    ($ty:ident) => {
        impl<G: $crate::Group> serde::Serialize for $ty<G> {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&$crate::Canonical::to_hex(self))
            }
        }

        impl<'de, G: $crate::Group> serde::Deserialize<'de> for $ty<G> {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = <String as serde::Deserialize>::deserialize(d)?;
                <Self as $crate::Canonical>::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}
pub(crate) use serde_via_canonical;

/// `#[serde(with = "scalar_hex")]` for bare scalar fields.
pub mod scalar_hex {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::Scalar;

    pub fn serialize<S: Scalar, Ser: Serializer>(v: &S, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.serialize_str(&hex::encode(v.to_bytes()))
    }

    pub fn deserialize<'de, S: Scalar, D: Deserializer<'de>>(d: D) -> Result<S, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(D::Error::custom)?;
        S::from_bytes(&bytes).ok_or_else(|| D::Error::custom("non-canonical scalar"))
    }
}
