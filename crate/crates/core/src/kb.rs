//! The fact store.
//!
//! Holds the basic per-entity facts for every processed frame, the static
//! entities that exist in all frames, and the index of cached spatial
//! relations. A high-water mark records the highest fully processed frame;
//! relation queries above it are rejected.
//!
//! The store itself is a plain value. Concurrent use goes through
//! [`SharedStore`]: a single writer ingests frames while any number of readers
//! hold read guards, so a reader never sees a half-processed frame.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::geometry::{rect_from_box, BoxSpec, Point, Rect};
use crate::spatial::{self, RelationFact, RelationQuery, SpatialConfig, SpatialRelation};
use crate::{EntityId, EntityType, Error, FrameNum, Result};

pub type SharedStore = Arc<RwLock<FactStore>>;

const SNAPSHOT_FORMAT: &str = "versa-kb-snapshot";
const SNAPSHOT_VERSION: u32 = 1;

/// The five basic facts of one entity in one frame. `exists` is implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityFrameFacts {
    pub entity: EntityId,
    pub frame: FrameNum,
    #[serde(rename = "type")]
    pub entity_type: EntityType,
    pub bounds: Rect,
    pub loc: Point,
    /// Degrees clockwise from straight up; 0 when not moving.
    pub orient: f64,
}

impl EntityFrameFacts {
    pub fn from_box(entity: EntityId, frame: FrameNum, entity_type: EntityType, b: BoxSpec, orient: f64) -> Self {
        Self {
            entity,
            frame,
            entity_type,
            bounds: rect_from_box(&b),
            loc: b.center,
            orient,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticEntity {
    pub id: EntityId,
    pub bounds: Rect,
    pub loc: Point,
    pub orient: f64,
}

/// Basic facts of an entity as seen in one frame, static or dynamic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntityState {
    pub entity_type: EntityType,
    pub bounds: Rect,
    pub loc: Point,
    pub orient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasicKind {
    Exists,
    Type,
    Bounds,
    Loc,
    Orient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasicValue {
    Exists,
    Type(EntityType),
    Bounds(Rect),
    Loc(Point),
    Orient(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasicBinding {
    pub entity: EntityId,
    pub frame: FrameNum,
    pub value: BasicValue,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RelationBinding {
    pub e1: EntityId,
    pub e2: EntityId,
    pub frame: FrameNum,
}

/// Configuration the cache was entailed with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub near_threshold: f64,
    pub functors: Vec<SpatialRelation>,
}

type FrameCache = BTreeSet<(SpatialRelation, EntityId, EntityId)>;

#[derive(Debug, Clone, Default)]
pub struct FactStore {
    frames: BTreeMap<FrameNum, BTreeMap<EntityId, EntityFrameFacts>>,
    statics: BTreeMap<EntityId, StaticEntity>,
    dynamic_ids: BTreeSet<EntityId>,
    cache: BTreeMap<FrameNum, FrameCache>,
    frames_by_relation: HashMap<SpatialRelation, BTreeSet<FrameNum>>,
    cache_record: Option<CacheRecord>,
    first_frame: Option<FrameNum>,
    high_water: Option<FrameNum>,
}

impl FactStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn shared(self) -> SharedStore {
        Arc::new(RwLock::new(self))
    }

    // ---- writes -----------------------------------------------------------------

    pub fn assert_entity_facts(&mut self, facts: EntityFrameFacts) -> Result<()> {
        let c = facts.bounds.center();
        if (c.x - facts.loc.x).abs() > 1e-9 || (c.y - facts.loc.y).abs() > 1e-9 {
            return Err(Error::LocationMismatch {
                entity: facts.entity,
                frame: facts.frame,
            });
        }
        if self.statics.contains_key(&facts.entity) {
            return Err(Error::StaticCollision(facts.entity));
        }
        let frame = self.frames.entry(facts.frame).or_default();
        if frame.contains_key(&facts.entity) {
            return Err(Error::DuplicateAssertion {
                entity: facts.entity,
                frame: facts.frame,
            });
        }
        self.dynamic_ids.insert(facts.entity.clone());
        frame.insert(facts.entity.clone(), facts);
        Ok(())
    }

    /// Registers an entity that exists, unchanged, in every frame.
    ///
    /// When relations have already been cached, the static entity's pairs
    /// are entailed for every processed frame so the cache stays complete.
    pub fn assert_static_entity(&mut self, id: EntityId, b: BoxSpec, orient: f64) -> Result<()> {
        if self.statics.contains_key(&id) {
            return Err(Error::DuplicateStatic(id));
        }
        if self.dynamic_ids.contains(&id) {
            return Err(Error::StaticCollision(id));
        }
        self.statics.insert(
            id.clone(),
            StaticEntity {
                id,
                bounds: rect_from_box(&b),
                loc: b.center,
                orient,
            },
        );
        if let Some(rec) = self.cache_record.clone() {
            let cfg = SpatialConfig {
                near_threshold: rec.near_threshold,
            };
            for frame in self.processed_frames() {
                let facts = spatial::entail_pairs(self, frame, &rec.functors, &cfg);
                self.insert_cached(facts);
            }
        }
        Ok(())
    }

    /// Records the configuration used for entailment, or checks it against
    /// the one already recorded.
    pub(crate) fn adopt_cache_config(&mut self, cfg: &SpatialConfig, functors: &[SpatialRelation]) -> Result<()> {
        match &self.cache_record {
            None => {
                self.cache_record = Some(CacheRecord {
                    near_threshold: cfg.near_threshold,
                    functors: functors.to_vec(),
                });
                Ok(())
            }
            Some(rec) if rec.near_threshold != cfg.near_threshold => Err(Error::StaleThreshold {
                cached: rec.near_threshold,
                requested: cfg.near_threshold,
            }),
            Some(rec) if rec.functors != functors => Err(Error::CacheMismatch(format!(
                "functors {:?} vs {:?}",
                rec.functors, functors
            ))),
            Some(_) => Ok(()),
        }
    }

    pub(crate) fn insert_cached<I: IntoIterator<Item = RelationFact>>(&mut self, facts: I) {
        for f in facts {
            self.frames_by_relation.entry(f.relation).or_default().insert(f.frame);
            self.cache.entry(f.frame).or_default().insert((f.relation, f.e1, f.e2));
        }
    }

    /// Advances the high-water mark; it never moves backwards.
    pub fn set_high_water(&mut self, frame: FrameNum) -> Result<()> {
        if let Some(current) = self.high_water {
            if frame < current {
                return Err(Error::HighWaterRegression {
                    current,
                    requested: frame,
                });
            }
        }
        self.high_water = Some(frame);
        if self.first_frame.is_none() {
            self.first_frame = Some(frame);
        }
        Ok(())
    }

    // ---- reads ------------------------------------------------------------------

    pub fn high_water(&self) -> Option<FrameNum> {
        self.high_water
    }

    pub fn cache_record(&self) -> Option<&CacheRecord> {
        self.cache_record.as_ref()
    }

    /// `(first, last)` processed frame.
    pub fn frame_range(&self) -> Option<(FrameNum, FrameNum)> {
        Some((self.first_frame?, self.high_water?))
    }

    /// Every frame number from the first processed one to the high-water
    /// mark. Numbers the annotation skipped count as empty frames.
    pub fn processed_frames(&self) -> RangeInclusive<FrameNum> {
        match self.frame_range() {
            Some((a, b)) => a..=b,
            #[allow(clippy::reversed_empty_ranges)]
            None => 1..=0,
        }
    }

    pub fn is_processed(&self, frame: FrameNum) -> bool {
        self.processed_frames().contains(&frame)
    }

    pub fn ensure_processed(&self, frame: FrameNum) -> Result<()> {
        if self.high_water.is_some_and(|hw| frame <= hw) {
            Ok(())
        } else {
            Err(Error::NotYetProcessed {
                frame,
                high_water: self.high_water,
            })
        }
    }

    pub fn statics(&self) -> impl Iterator<Item = &StaticEntity> {
        self.statics.values()
    }

    pub fn static_entity(&self, id: &EntityId) -> Option<&StaticEntity> {
        self.statics.get(id)
    }

    /// Dynamic entities with facts in `frame`, ascending ids. Statics excluded.
    pub fn entities_in_frame(&self, frame: FrameNum) -> Vec<EntityId> {
        self.frames
            .get(&frame)
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn frame_facts(&self, frame: FrameNum) -> impl Iterator<Item = &EntityFrameFacts> {
        self.frames.get(&frame).into_iter().flat_map(|m| m.values())
    }

    /// Dynamic entities of the frame followed by every static entity.
    pub fn entities_present(&self, frame: FrameNum) -> Vec<EntityId> {
        let mut v = self.entities_in_frame(frame);
        v.extend(self.statics.keys().cloned());
        v
    }

    pub fn entity_state(&self, e: &EntityId, frame: FrameNum) -> Option<EntityState> {
        if let Some(f) = self.frames.get(&frame).and_then(|m| m.get(e)) {
            return Some(EntityState {
                entity_type: f.entity_type,
                bounds: f.bounds,
                loc: f.loc,
                orient: f.orient,
            });
        }
        self.statics.get(e).map(|s| EntityState {
            entity_type: EntityType::Static,
            bounds: s.bounds,
            loc: s.loc,
            orient: s.orient,
        })
    }

    pub fn exists(&self, e: &EntityId, frame: FrameNum) -> bool {
        self.entity_state(e, frame).is_some()
    }

    /// Distinct dynamic entities seen so far.
    pub fn entity_count(&self) -> usize {
        self.dynamic_ids.len()
    }

    /// Number of basic facts (five per entity per frame).
    pub fn basic_fact_count(&self) -> usize {
        5 * self.frames.values().map(BTreeMap::len).sum::<usize>()
    }

    pub fn cached_fact_count(&self) -> usize {
        self.cache.values().map(BTreeSet::len).sum()
    }

    pub fn cached_facts(&self, frame: FrameNum) -> Vec<RelationFact> {
        self.cache
            .get(&frame)
            .into_iter()
            .flatten()
            .map(|(r, a, b)| RelationFact {
                relation: *r,
                e1: a.clone(),
                e2: b.clone(),
                frame,
            })
            .collect()
    }

    /// Wildcard query over the basic facts. A `None` argument is a wildcard.
    ///
    /// With a wildcard frame, bindings come in ascending frame order.
    pub fn query_basic(&self, kind: BasicKind, entity: Option<&EntityId>, frame: Option<FrameNum>) -> Vec<BasicBinding> {
        let frames: Vec<FrameNum> = match frame {
            Some(f) => vec![f],
            None => {
                if self.statics.is_empty() || entity.is_some_and(|e| !self.statics.contains_key(e)) {
                    self.frames.keys().copied().collect()
                } else {
                    let mut all: BTreeSet<FrameNum> = self.processed_frames().collect();
                    all.extend(self.frames.keys().copied());
                    all.into_iter().collect()
                }
            }
        };
        let mut out = Vec::new();
        for f in frames {
            let ids = match entity {
                Some(e) => vec![e.clone()],
                None => {
                    let mut v = self.entities_in_frame(f);
                    if frame.is_some() || self.is_processed(f) {
                        v.extend(self.statics.keys().cloned());
                    }
                    v
                }
            };
            for e in ids {
                if frame.is_none() && self.statics.contains_key(&e) && !self.is_processed(f) {
                    continue;
                }
                if let Some(st) = self.entity_state(&e, f) {
                    let value = match kind {
                        BasicKind::Exists => BasicValue::Exists,
                        BasicKind::Type => BasicValue::Type(st.entity_type),
                        BasicKind::Bounds => BasicValue::Bounds(st.bounds),
                        BasicKind::Loc => BasicValue::Loc(st.loc),
                        BasicKind::Orient => BasicValue::Orient(st.orient),
                    };
                    out.push(BasicBinding {
                        entity: e,
                        frame: f,
                        value,
                    });
                }
            }
        }
        out
    }

    /// Fails when cached `near` facts were entailed under another threshold.
    pub fn check_threshold(&self, cfg: &SpatialConfig) -> Result<()> {
        match &self.cache_record {
            Some(rec) if rec.functors.contains(&SpatialRelation::Near) && rec.near_threshold != cfg.near_threshold => {
                Err(Error::StaleThreshold {
                    cached: rec.near_threshold,
                    requested: cfg.near_threshold,
                })
            }
            _ => Ok(()),
        }
    }

    fn stored_form(&self, rel: RelationQuery) -> Result<(SpatialRelation, bool, bool)> {
        let (stored, swap, neg) = rel.relation.cached_form();
        let cached = match &self.cache_record {
            Some(rec) => rec.functors.contains(&stored),
            None => false,
        };
        if !cached {
            return Err(Error::NotCached(rel.relation.name().to_string()));
        }
        Ok((stored, swap, neg != rel.negated))
    }

    fn cache_has(&self, frame: FrameNum, rel: SpatialRelation, a: &EntityId, b: &EntityId) -> bool {
        self.cache
            .get(&frame)
            .is_some_and(|c| c.contains(&(rel, a.clone(), b.clone())))
    }

    /// Answers one ground relation from the cache. A negated relation holds
    /// only when both entities exist in the frame.
    pub fn cached_holds(&self, rel: RelationQuery, e1: &EntityId, e2: &EntityId, frame: FrameNum) -> Result<bool> {
        self.ensure_processed(frame)?;
        let (stored, swap, neg) = self.stored_form(rel)?;
        if e1 == e2 {
            return Ok(false);
        }
        let (a, b) = if swap { (e2, e1) } else { (e1, e2) };
        if neg {
            Ok(self.exists(e1, frame) && self.exists(e2, frame) && !self.cache_has(frame, stored, a, b))
        } else {
            Ok(self.cache_has(frame, stored, a, b))
        }
    }

    /// Wildcard lookup of a relation in the cache.
    ///
    /// Stored functors answer by index lookup, converses by swapping
    /// arguments, and `not_` forms (and `outside`) by absence of the
    /// positive fact between two entities that both exist in the frame.
    pub fn query_cached(
        &self,
        rel: RelationQuery,
        e1: Option<&EntityId>,
        e2: Option<&EntityId>,
        frame: Option<FrameNum>,
    ) -> Result<Vec<RelationBinding>> {
        if let Some(f) = frame {
            self.ensure_processed(f)?;
        }
        if self.cache_record.is_none() && self.high_water.is_none() {
            return Ok(Vec::new());
        }
        let (stored, swap, neg) = self.stored_form(rel)?;
        let frames: Vec<FrameNum> = match (frame, neg) {
            (Some(f), _) => vec![f],
            (None, false) => self
                .frames_by_relation
                .get(&stored)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default(),
            (None, true) => self.processed_frames().collect(),
        };
        let mut out = Vec::new();
        for f in frames {
            if neg {
                let present = self.entities_present(f);
                let firsts: Vec<EntityId> = match e1 {
                    Some(e) => vec![e.clone()],
                    None => present.clone(),
                };
                for a in &firsts {
                    if !self.exists(a, f) {
                        continue;
                    }
                    for b in &present {
                        if a == b || e2.is_some_and(|x| x != b) {
                            continue;
                        }
                        let (s1, s2) = if swap { (b, a) } else { (a, b) };
                        if !self.cache_has(f, stored, s1, s2) {
                            out.push(RelationBinding {
                                e1: a.clone(),
                                e2: b.clone(),
                                frame: f,
                            });
                        }
                    }
                }
            } else if let Some(cache) = self.cache.get(&f) {
                for (r, a, b) in cache.iter() {
                    if *r != stored {
                        continue;
                    }
                    let (x, y) = if swap { (b, a) } else { (a, b) };
                    if e1.is_some_and(|e| e != x) || e2.is_some_and(|e| e != y) {
                        continue;
                    }
                    out.push(RelationBinding {
                        e1: x.clone(),
                        e2: y.clone(),
                        frame: f,
                    });
                }
            }
        }
        if swap && !neg {
            out.sort();
        }
        Ok(out)
    }

    // ---- snapshots --------------------------------------------------------------

    /// Writes a versioned, self-describing snapshot. Identical stores produce
    /// identical bytes.
    pub fn save_snapshot<W: Write>(&self, w: W) -> Result<()> {
        let snap = Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            cache: self.cache_record.clone(),
            first_frame: self.first_frame,
            high_water: self.high_water,
            statics: self.statics.values().cloned().collect(),
            facts: self.frames.values().flat_map(|m| m.values().cloned()).collect(),
            cached: self
                .cache
                .keys()
                .flat_map(|f| self.cached_facts(*f))
                .collect(),
        };
        serde_json::to_writer_pretty(w, &snap)?;
        Ok(())
    }

    pub fn load_snapshot<R: Read>(r: R) -> Result<Self> {
        let snap: Snapshot = serde_json::from_reader(r)?;
        if snap.format != SNAPSHOT_FORMAT {
            return Err(Error::Snapshot(format!("unexpected format `{}`", snap.format)));
        }
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {}", snap.version)));
        }
        let mut store = FactStore::new();
        for f in snap.facts {
            store.assert_entity_facts(f)?;
        }
        for s in snap.statics {
            store.dynamic_ids.remove(&s.id);
            store.statics.insert(s.id.clone(), s);
        }
        store.cache_record = snap.cache;
        store.insert_cached(snap.cached);
        store.first_frame = snap.first_frame;
        store.high_water = snap.high_water;
        Ok(store)
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    cache: Option<CacheRecord>,
    first_frame: Option<FrameNum>,
    high_water: Option<FrameNum>,
    statics: Vec<StaticEntity>,
    facts: Vec<EntityFrameFacts>,
    cached: Vec<RelationFact>,
}
