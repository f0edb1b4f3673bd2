use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A video frame number.
pub type FrameNum = u32;

/// Identifier of an entity.
///
/// CVML annotations number their tracked objects; static entities such as a
/// storefront region carry symbolic names. Numeric ids order before symbolic
/// ones, numerically among themselves.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntityId {
    Num(u64),
    Name(String),
}

impl EntityId {
    pub fn name(s: impl Into<String>) -> Self {
        EntityId::Name(s.into())
    }
}

impl Ord for EntityId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (EntityId::Num(a), EntityId::Num(b)) => a.cmp(b),
            (EntityId::Num(_), EntityId::Name(_)) => Ordering::Less,
            (EntityId::Name(_), EntityId::Num(_)) => Ordering::Greater,
            (EntityId::Name(a), EntityId::Name(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for EntityId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<u64> for EntityId {
    fn from(n: u64) -> Self {
        EntityId::Num(n)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        s.parse().unwrap_or_else(|_| EntityId::Name(s.to_string()))
    }
}

impl FromStr for EntityId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        Ok(match s.parse::<u64>() {
            Ok(n) => EntityId::Num(n),
            Err(_) => EntityId::Name(s.to_string()),
        })
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityId::Num(n) => write!(f, "{n}"),
            EntityId::Name(s) => f.write_str(s),
        }
    }
}

/// Entity classification.
///
/// Declaration order is the sort order used by frame signatures
/// (`object` < `person` < `static`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityType {
    Object,
    Person,
    Static,
}

impl EntityType {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Object => "object",
            EntityType::Person => "person",
            EntityType::Static => "static",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim() {
            "object" => Ok(EntityType::Object),
            "person" => Ok(EntityType::Person),
            "static" => Ok(EntityType::Static),
            other => Err(crate::Error::UnknownEntityType(other.to_string())),
        }
    }
}
