//! Entity-level spatial relations within a single frame.
//!
//! Only a subset of relations is cached at ingestion time
//! ([`DEFAULT_CACHED`]); the rest are answered from the cache by swapping
//! arguments (`lower`, `below`, `moreRight`, `rightOf`) or by negation
//! (`outside`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{self, Rect};
use crate::kb::FactStore;
use crate::{EntityId, Error, FrameNum, Result};

/// Default `near` threshold in pixels.
pub const DEFAULT_NEAR_THRESHOLD: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpatialRelation {
    #[serde(rename = "near")]
    Near,
    #[serde(rename = "overlapping")]
    Overlapping,
    #[serde(rename = "inside")]
    Inside,
    #[serde(rename = "outside")]
    Outside,
    #[serde(rename = "higher")]
    Higher,
    #[serde(rename = "lower")]
    Lower,
    #[serde(rename = "above")]
    Above,
    #[serde(rename = "below")]
    Below,
    #[serde(rename = "moreLeft")]
    MoreLeft,
    #[serde(rename = "moreRight")]
    MoreRight,
    #[serde(rename = "leftOf")]
    LeftOf,
    #[serde(rename = "rightOf")]
    RightOf,
}

/// Relations evaluated and stored for every frame at ingestion.
pub const DEFAULT_CACHED: [SpatialRelation; 7] = [
    SpatialRelation::Near,
    SpatialRelation::Overlapping,
    SpatialRelation::Inside,
    SpatialRelation::Higher,
    SpatialRelation::MoreLeft,
    SpatialRelation::Above,
    SpatialRelation::LeftOf,
];

impl SpatialRelation {
    pub const ALL: [SpatialRelation; 12] = [
        SpatialRelation::Near,
        SpatialRelation::Overlapping,
        SpatialRelation::Inside,
        SpatialRelation::Outside,
        SpatialRelation::Higher,
        SpatialRelation::Lower,
        SpatialRelation::Above,
        SpatialRelation::Below,
        SpatialRelation::MoreLeft,
        SpatialRelation::MoreRight,
        SpatialRelation::LeftOf,
        SpatialRelation::RightOf,
    ];

    pub fn name(self) -> &'static str {
        use SpatialRelation::*;
        match self {
            Near => "near",
            Overlapping => "overlapping",
            Inside => "inside",
            Outside => "outside",
            Higher => "higher",
            Lower => "lower",
            Above => "above",
            Below => "below",
            MoreLeft => "moreLeft",
            MoreRight => "moreRight",
            LeftOf => "leftOf",
            RightOf => "rightOf",
        }
    }

    /// The named relation that holds with arguments swapped. `inside` has
    /// none (its converse would be "contains").
    pub fn converse(self) -> Option<SpatialRelation> {
        use SpatialRelation::*;
        Some(match self {
            Higher => Lower,
            Lower => Higher,
            Above => Below,
            Below => Above,
            MoreLeft => MoreRight,
            MoreRight => MoreLeft,
            LeftOf => RightOf,
            RightOf => LeftOf,
            Near | Overlapping | Outside => self,
            Inside => return None,
        })
    }

    pub fn is_symmetric(self) -> bool {
        matches!(
            self,
            SpatialRelation::Near | SpatialRelation::Overlapping | SpatialRelation::Outside
        )
    }

    /// How a query for `self` is answered from [`DEFAULT_CACHED`]:
    /// `(stored functor, swap arguments, negate)`.
    pub fn cached_form(self) -> (SpatialRelation, bool, bool) {
        use SpatialRelation::*;
        match self {
            Lower => (Higher, true, false),
            Below => (Above, true, false),
            MoreRight => (MoreLeft, true, false),
            RightOf => (LeftOf, true, false),
            Outside => (Overlapping, false, true),
            other => (other, false, false),
        }
    }
}

impl fmt::Display for SpatialRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpatialRelation {
    type Err = Error;

    /// Accepts the camel-case names as well as snake-case spellings
    /// (`more_left`, `left_of`).
    fn from_str(s: &str) -> Result<Self> {
        let folded: String = s.chars().filter(|c| *c != '_').flat_map(char::to_lowercase).collect();
        SpatialRelation::ALL
            .into_iter()
            .find(|r| r.name().to_lowercase() == folded)
            .ok_or_else(|| Error::UnknownSpatialRelation(s.to_string()))
    }
}

/// A relation name as written in a query: optionally `not_`-prefixed and
/// optionally `_kb`-suffixed. The suffix is accepted and dropped; whether the
/// cache is consulted is decided by the caller's [`RelationMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationQuery {
    pub relation: SpatialRelation,
    pub negated: bool,
}

impl RelationQuery {
    pub const fn positive(relation: SpatialRelation) -> Self {
        Self {
            relation,
            negated: false,
        }
    }

    pub const fn negative(relation: SpatialRelation) -> Self {
        Self {
            relation,
            negated: true,
        }
    }

    /// Serialized form with the `_kb` marker, e.g. `not_near_kb`.
    pub fn kb_name(&self) -> String {
        format!("{self}_kb")
    }
}

impl FromStr for RelationQuery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (negated, rest) = match t.strip_prefix("not_") {
            Some(r) => (true, r),
            None => (false, t),
        };
        let rest = rest.strip_suffix("_kb").unwrap_or(rest);
        let relation = rest
            .parse()
            .map_err(|_| Error::UnknownSpatialRelation(s.to_string()))?;
        Ok(Self { relation, negated })
    }
}

impl fmt::Display for RelationQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not_")?;
        }
        f.write_str(self.relation.name())
    }
}

/// Whether relation queries read the cache or recompute from basic facts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationMode {
    #[default]
    Cached,
    Entail,
}

impl FromStr for RelationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cached" | "kb" => Ok(RelationMode::Cached),
            "entail" | "entailed" => Ok(RelationMode::Entail),
            other => Err(Error::InvalidTemplate(format!("unknown relation mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    /// Distance in pixels below which two entity centers are `near`.
    pub near_threshold: f64,
}

impl SpatialConfig {
    pub fn new(near_threshold: f64) -> Result<Self> {
        if !(near_threshold.is_finite() && near_threshold > 0.0) {
            return Err(Error::InvalidNearThreshold(near_threshold));
        }
        Ok(Self { near_threshold })
    }

    /// Reads [`crate::NEAR_THRESHOLD_ENV`], falling back to the default.
    pub fn from_env() -> Result<Self> {
        match std::env::var(crate::NEAR_THRESHOLD_ENV) {
            Ok(v) => {
                let t: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidNearThreshold(f64::NAN))?;
                Self::new(t)
            }
            Err(_) => Ok(Self::default()),
        }
    }
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self {
            near_threshold: DEFAULT_NEAR_THRESHOLD,
        }
    }
}

/// A cached relation instance, the `near_kb(p1,p2,135)` of the store.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationFact {
    pub relation: SpatialRelation,
    pub e1: EntityId,
    pub e2: EntityId,
    pub frame: FrameNum,
}

impl fmt::Display for RelationFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_kb({},{},{})", self.relation, self.e1, self.e2, self.frame)
    }
}

/// Evaluates a positive relation between two bounding rectangles.
pub fn holds(rel: SpatialRelation, a: &Rect, b: &Rect, cfg: &SpatialConfig) -> bool {
    use SpatialRelation::*;
    match rel {
        Near => geometry::dist(a.center(), b.center()) < cfg.near_threshold,
        Overlapping => geometry::overlaps(a, b),
        Inside => geometry::rect_inside(a, b),
        Outside => !geometry::overlaps(a, b),
        Higher => geometry::rect_higher(a, b),
        Lower => geometry::rect_lower(a, b),
        Above => geometry::rect_higher(a, b) && geometry::in_x_range(a, b),
        Below => geometry::rect_lower(a, b) && geometry::in_x_range(a, b),
        MoreLeft => geometry::rect_left(a, b),
        MoreRight => geometry::rect_right(a, b),
        LeftOf => geometry::rect_left(a, b) && geometry::in_y_range(a, b),
        RightOf => geometry::rect_right(a, b) && geometry::in_y_range(a, b),
    }
}

fn bounds_of(store: &FactStore, e: &EntityId, frame: FrameNum) -> Result<Rect> {
    store
        .entity_state(e, frame)
        .map(|s| s.bounds)
        .ok_or_else(|| Error::UnknownEntityInFrame {
            entity: e.clone(),
            frame,
        })
}

/// Distance between the centers of two entities in a frame.
pub fn entity_dist(store: &FactStore, e1: &EntityId, e2: &EntityId, frame: FrameNum) -> Result<f64> {
    let a = store.entity_state(e1, frame).ok_or_else(|| Error::UnknownEntityInFrame {
        entity: e1.clone(),
        frame,
    })?;
    let b = store.entity_state(e2, frame).ok_or_else(|| Error::UnknownEntityInFrame {
        entity: e2.clone(),
        frame,
    })?;
    Ok(geometry::dist(a.loc, b.loc))
}

/// Computes a (possibly negated) relation from basic facts.
///
/// A negated relation holds when both entities exist in the frame and the
/// positive relation does not.
pub fn eval_relation(
    store: &FactStore,
    rel: RelationQuery,
    e1: &EntityId,
    e2: &EntityId,
    frame: FrameNum,
    cfg: &SpatialConfig,
) -> Result<bool> {
    if e1 == e2 {
        return Err(Error::ReflexivePair(e1.clone()));
    }
    let a = bounds_of(store, e1, frame)?;
    let b = bounds_of(store, e2, frame)?;
    Ok(holds(rel.relation, &a, &b, cfg) != rel.negated)
}

/// All facts that hold in `frame` for `functors`, over every ordered pair of
/// distinct entities present (statics included). Does not touch the store.
pub fn entail_pairs(
    store: &FactStore,
    frame: FrameNum,
    functors: &[SpatialRelation],
    cfg: &SpatialConfig,
) -> Vec<RelationFact> {
    let present: Vec<(EntityId, Rect)> = store
        .entities_present(frame)
        .into_iter()
        .filter_map(|e| store.entity_state(&e, frame).map(|s| (e, s.bounds)))
        .collect();
    let mut out = Vec::new();
    for &rel in functors {
        for (e1, r1) in &present {
            for (e2, r2) in &present {
                if e1 != e2 && holds(rel, r1, r2, cfg) {
                    out.push(RelationFact {
                        relation: rel,
                        e1: e1.clone(),
                        e2: e2.clone(),
                        frame,
                    });
                }
            }
        }
    }
    out
}

/// Entails the relations that hold in `frame` and stores them in the cache.
pub fn entail_frame(
    store: &mut FactStore,
    frame: FrameNum,
    functors: &[SpatialRelation],
    cfg: &SpatialConfig,
) -> Result<Vec<RelationFact>> {
    store.adopt_cache_config(cfg, functors)?;
    let facts = entail_pairs(store, frame, functors, cfg);
    store.insert_cached(facts.iter().cloned());
    Ok(facts)
}
