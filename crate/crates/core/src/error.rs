use thiserror::Error;

use crate::{EntityId, FrameNum};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("entity {entity} does not exist in frame {frame}")]
    UnknownEntityInFrame { entity: EntityId, frame: FrameNum },

    #[error("relation needs two distinct entities, got {0} twice")]
    ReflexivePair(EntityId),

    #[error("unknown spatial relation `{0}`")]
    UnknownSpatialRelation(String),

    #[error("unknown temporal relation `{0}`")]
    UnknownTemporalRelation(String),

    #[error("temporal relation `{name}` expects {expected} arguments, got {got}")]
    TemporalArity {
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("unknown entity type `{0}`")]
    UnknownEntityType(String),

    #[error("invalid time reference [{begin}, {end}]: begin must not exceed end")]
    InvalidTimeRef { begin: FrameNum, end: FrameNum },

    #[error("facts for entity {entity} in frame {frame} were already asserted")]
    DuplicateAssertion { entity: EntityId, frame: FrameNum },

    #[error("location of entity {entity} in frame {frame} is not the center of its bounds")]
    LocationMismatch { entity: EntityId, frame: FrameNum },

    #[error("static entity {0} is already registered")]
    DuplicateStatic(EntityId),

    #[error("entity id {0} is already used by a dynamic entity")]
    StaticCollision(EntityId),

    #[error("frame {frame} has not been processed yet (high-water mark {high_water:?})")]
    NotYetProcessed {
        frame: FrameNum,
        high_water: Option<FrameNum>,
    },

    #[error("high-water mark cannot move back from {current} to {requested}")]
    HighWaterRegression { current: FrameNum, requested: FrameNum },

    #[error("frame {0} was already processed")]
    AlreadyProcessed(FrameNum),

    #[error("cache was entailed with a different configuration: {0}")]
    CacheMismatch(String),

    #[error("relation `{0}` is not in the cached functor set")]
    NotCached(String),

    #[error("cached `near` facts were entailed with threshold {cached}, query uses {requested}")]
    StaleThreshold { cached: f64, requested: f64 },

    #[error("near threshold must be positive and finite, got {0}")]
    InvalidNearThreshold(f64),

    #[error("match threshold must lie in [0, 1], got {0}")]
    InvalidMatchThreshold(f64),

    #[error("not-exists term `{0}` is not bound by an earlier step")]
    UnboundNotExists(String),

    #[error("invalid template: {0}")]
    InvalidTemplate(String),

    #[error("unknown static area {0}")]
    UnknownArea(EntityId),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("invalid sketch: {0}")]
    InvalidSketch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Cvml(#[from] crate::cvml::CvmlError),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
