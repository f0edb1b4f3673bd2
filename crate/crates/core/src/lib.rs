//! Rule-based event recognition over fixed-camera surveillance annotations.
//!
//! The crate ingests per-frame entity annotations (CVML), asserts basic
//! facts about each entity into a [`FactStore`](kb::FactStore), caches the
//! spatial relations that hold between every pair of entities in a frame,
//! and answers frame-template and event-template queries over that store.
//!
//! Layering, bottom up:
//!
//! - [`geometry`]: points and axis-aligned rectangles in image coordinates.
//! - [`spatial`]: entity-level relations (`near`, `above`, `leftOf`, ...)
//!   and per-frame entailment.
//! - [`temporal`]: instant and interval relations over frame numbers.
//! - [`interval_sets`]: canonical interval sets, timestamp lists, closing.
//! - [`kb`]: the fact store with its cached-relation index and snapshots.
//! - [`cvml`]: CVML parsing (whole document or streamed) and frame processing.
//! - [`templates`]: frame signatures, frame templates and match queries.
//! - [`events`]: multi-step event templates, `left_item`, `loitering_in`.
//! - [`monitor`]: the incremental event monitor and its alert actions.
//! - [`service`]: the HTTP API used by the authoring UI.
//! - [`cli`]: the `versa` command line.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod cli;
pub mod cvml;
pub mod error;
pub mod events;
pub mod geometry;
pub mod interval_sets;
pub mod kb;
pub mod monitor;
pub mod service;
pub mod sketch;
pub mod spatial;
pub mod synthetic;
pub mod temporal;
pub mod templates;

mod ids;

pub use error::{Error, Result};
pub use ids::{EntityId, EntityType, FrameNum};

/// Two-frame CVML sample from the start of the CAVIAR "Left Bag" recording.
pub const LEFT_BAG_SAMPLE: &str = include_str!("../testdata/left_bag_sample.xml");

/// Environment variable overriding the default `near` threshold.
pub const NEAR_THRESHOLD_ENV: &str = "VERSA_NEAR_THRESHOLD";
