//! Instant and interval relations over discrete frame numbers.
//!
//! Intervals include both endpoint frames. An instant is an interval whose
//! begin equals its end; a proper interval has `begin < end`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, FrameNum, Result};

/// A frame instant (`[923]`) or interval (`[923, 958]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeRef {
    pub begin: FrameNum,
    pub end: FrameNum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeKind {
    Instant,
    /// An interval that is not an instant; every `TimeRef` is also an interval.
    ProperInterval,
}

impl TimeRef {
    pub fn new(begin: FrameNum, end: FrameNum) -> Result<Self> {
        if begin > end {
            return Err(Error::InvalidTimeRef { begin, end });
        }
        Ok(Self { begin, end })
    }

    pub const fn instant(frame: FrameNum) -> Self {
        Self {
            begin: frame,
            end: frame,
        }
    }

    pub fn is_instant(&self) -> bool {
        self.begin == self.end
    }

    pub fn is_interval(&self) -> bool {
        true
    }

    pub fn is_proper_interval(&self) -> bool {
        self.begin < self.end
    }

    pub fn classify(&self) -> TimeKind {
        if self.is_instant() {
            TimeKind::Instant
        } else {
            TimeKind::ProperInterval
        }
    }

    pub fn contains_frame(&self, f: FrameNum) -> bool {
        self.begin <= f && f <= self.end
    }

    fn span(&self) -> (FrameNum, FrameNum) {
        (self.begin, self.end)
    }
}

impl fmt::Display for TimeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}--{}", self.begin, self.end)
    }
}

// ---- instant / interval relations -------------------------------------------------

/// The instant at which `t` begins.
pub fn begins(t: TimeRef) -> TimeRef {
    TimeRef::instant(t.begin)
}

/// The instant at which `t` ends.
pub fn ends(t: TimeRef) -> TimeRef {
    TimeRef::instant(t.end)
}

/// `x` finishes strictly before `y` starts. Works for instants and intervals.
pub fn before(x: TimeRef, y: TimeRef) -> bool {
    x.end < y.begin
}

pub fn after(x: TimeRef, y: TimeRef) -> bool {
    before(y, x)
}

/// Instant strictly within a proper interval, endpoints excluded.
pub fn inside(instant: FrameNum, v: TimeRef) -> bool {
    v.is_proper_interval() && v.begin < instant && instant < v.end
}

/// Instant at the start of, or strictly within, the interval.
pub fn begins_or_in(instant: FrameNum, v: TimeRef) -> bool {
    v.begin <= instant && instant < v.end
}

/// Interval spanning two instants, when the first precedes the second.
pub fn time_between(i1: FrameNum, i2: FrameNum) -> Option<TimeRef> {
    (i1 < i2).then_some(TimeRef { begin: i1, end: i2 })
}

/// Checks that `v` is the interval spanning `i1` and `i2`.
pub fn is_time_between(v: TimeRef, i1: FrameNum, i2: FrameNum) -> bool {
    time_between(i1, i2) == Some(v)
}

/// The thirteen basic relations between two proper intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AllenRelation {
    Equals,
    Before,
    After,
    Meets,
    MetBy,
    Overlaps,
    OverlappedBy,
    Starts,
    StartedBy,
    During,
    Contains,
    Finishes,
    FinishedBy,
}

impl AllenRelation {
    pub const ALL: [AllenRelation; 13] = [
        AllenRelation::Equals,
        AllenRelation::Before,
        AllenRelation::After,
        AllenRelation::Meets,
        AllenRelation::MetBy,
        AllenRelation::Overlaps,
        AllenRelation::OverlappedBy,
        AllenRelation::Starts,
        AllenRelation::StartedBy,
        AllenRelation::During,
        AllenRelation::Contains,
        AllenRelation::Finishes,
        AllenRelation::FinishedBy,
    ];

    pub fn converse(self) -> AllenRelation {
        use AllenRelation::*;
        match self {
            Equals => Equals,
            Before => After,
            After => Before,
            Meets => MetBy,
            MetBy => Meets,
            Overlaps => OverlappedBy,
            OverlappedBy => Overlaps,
            Starts => StartedBy,
            StartedBy => Starts,
            During => Contains,
            Contains => During,
            Finishes => FinishedBy,
            FinishedBy => Finishes,
        }
    }

    /// Classifies two proper intervals given as `(begin, end)` pairs.
    pub fn between<T: PartialOrd + Copy>(a: (T, T), b: (T, T)) -> Option<AllenRelation> {
        AllenRelation::ALL
            .into_iter()
            .find(|r| IntervalRelation::Allen(*r).holds_on(a, b))
    }
}

/// Every interval-interval relation name, including the two composites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntervalRelation {
    Allen(AllenRelation),
    /// `starts` or `during`; equality is excluded.
    StartsOrDuring,
    /// No shared frame (meeting intervals share one, so they do overlap here).
    NonOverlap,
}

impl IntervalRelation {
    pub const ALL: [IntervalRelation; 15] = [
        IntervalRelation::Allen(AllenRelation::Equals),
        IntervalRelation::Allen(AllenRelation::Before),
        IntervalRelation::Allen(AllenRelation::After),
        IntervalRelation::Allen(AllenRelation::Meets),
        IntervalRelation::Allen(AllenRelation::MetBy),
        IntervalRelation::Allen(AllenRelation::Overlaps),
        IntervalRelation::Allen(AllenRelation::OverlappedBy),
        IntervalRelation::Allen(AllenRelation::Starts),
        IntervalRelation::Allen(AllenRelation::StartedBy),
        IntervalRelation::Allen(AllenRelation::During),
        IntervalRelation::Allen(AllenRelation::Contains),
        IntervalRelation::Allen(AllenRelation::Finishes),
        IntervalRelation::Allen(AllenRelation::FinishedBy),
        IntervalRelation::StartsOrDuring,
        IntervalRelation::NonOverlap,
    ];

    pub fn name(self) -> &'static str {
        use AllenRelation::*;
        match self {
            IntervalRelation::Allen(a) => match a {
                Equals => "int_equals",
                Before => "int_before",
                After => "int_after",
                Meets => "int_meets",
                MetBy => "int_met_by",
                Overlaps => "int_overlaps",
                OverlappedBy => "int_overlapped_by",
                Starts => "int_starts",
                StartedBy => "int_started_by",
                During => "int_during",
                Contains => "int_contains",
                Finishes => "int_finishes",
                FinishedBy => "int_finished_by",
            },
            IntervalRelation::StartsOrDuring => "starts_or_during",
            IntervalRelation::NonOverlap => "nonoverlap",
        }
    }

    /// Evaluates the relation on `(begin, end)` pairs of any ordered type,
    /// which lets layout coordinates reuse the frame semantics.
    pub fn holds_on<T: PartialOrd + Copy>(self, a: (T, T), b: (T, T)) -> bool {
        use AllenRelation::*;
        let ((a1, b1), (a2, b2)) = (a, b);
        match self {
            IntervalRelation::Allen(r) => match r {
                Equals => a1 == a2 && b1 == b2,
                Before => b1 < a2,
                Meets => b1 == a2,
                Overlaps => a1 < a2 && a2 < b1 && b1 < b2,
                Starts => a1 == a2 && b1 < b2,
                During => a2 < a1 && b1 < b2,
                Finishes => b1 == b2 && a2 < a1,
                After | MetBy | OverlappedBy | StartedBy | Contains | FinishedBy => {
                    IntervalRelation::Allen(r.converse()).holds_on(b, a)
                }
            },
            IntervalRelation::StartsOrDuring => {
                IntervalRelation::Allen(Starts).holds_on(a, b) || IntervalRelation::Allen(During).holds_on(a, b)
            }
            IntervalRelation::NonOverlap => b1 < a2 || b2 < a1,
        }
    }

    pub fn holds(self, a: TimeRef, b: TimeRef) -> bool {
        self.holds_on(a.span(), b.span())
    }
}

impl fmt::Display for IntervalRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntervalRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        // `int_earlier` appears in the timeline functor list without a
        // definition; it is read as `int_before`.
        if s == "int_earlier" {
            return Ok(IntervalRelation::Allen(AllenRelation::Before));
        }
        IntervalRelation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::UnknownTemporalRelation(s.to_string()))
    }
}

/// Named interval relation test, as used by the query layer.
pub fn interval_relation(name: &str, a: TimeRef, b: TimeRef) -> Result<bool> {
    Ok(name.parse::<IntervalRelation>()?.holds(a, b))
}

/// Binary instant relations usable between two time references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstantRelation {
    Before,
    After,
    /// First argument is the instant at which the second begins.
    Begins,
    /// First argument is the instant at which the second ends.
    Ends,
    /// First argument is an instant strictly inside the second.
    Inside,
    BeginsOrIn,
}

impl InstantRelation {
    pub const ALL: [InstantRelation; 6] = [
        InstantRelation::Before,
        InstantRelation::After,
        InstantRelation::Begins,
        InstantRelation::Ends,
        InstantRelation::Inside,
        InstantRelation::BeginsOrIn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InstantRelation::Before => "before",
            InstantRelation::After => "after",
            InstantRelation::Begins => "begins",
            InstantRelation::Ends => "ends",
            InstantRelation::Inside => "inside",
            InstantRelation::BeginsOrIn => "begins_or_in",
        }
    }

    pub fn holds(self, x: TimeRef, y: TimeRef) -> bool {
        match self {
            InstantRelation::Before => before(x, y),
            InstantRelation::After => after(x, y),
            InstantRelation::Begins => x == begins(y),
            InstantRelation::Ends => x == ends(y),
            InstantRelation::Inside => x.is_instant() && inside(x.begin, y),
            InstantRelation::BeginsOrIn => x.is_instant() && begins_or_in(x.begin, y),
        }
    }
}

/// Any binary temporal relation that can constrain two event steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemporalRelation {
    Instant(InstantRelation),
    Interval(IntervalRelation),
}

impl TemporalRelation {
    pub fn name(self) -> &'static str {
        match self {
            TemporalRelation::Instant(r) => r.name(),
            TemporalRelation::Interval(r) => r.name(),
        }
    }

    pub fn holds(self, x: TimeRef, y: TimeRef) -> bool {
        match self {
            TemporalRelation::Instant(r) => r.holds(x, y),
            TemporalRelation::Interval(r) => r.holds(x, y),
        }
    }

    /// Evaluates a named relation over an argument list, checking arity.
    pub fn eval_named(name: &str, args: &[TimeRef]) -> Result<bool> {
        if name == "time_between" {
            if args.len() != 3 {
                return Err(Error::TemporalArity {
                    name: name.into(),
                    expected: 3,
                    got: args.len(),
                });
            }
            if !(args[1].is_instant() && args[2].is_instant()) {
                return Ok(false);
            }
            return Ok(is_time_between(args[0], args[1].begin, args[2].begin));
        }
        let rel: TemporalRelation = name.parse()?;
        if args.len() != 2 {
            return Err(Error::TemporalArity {
                name: name.into(),
                expected: 2,
                got: args.len(),
            });
        }
        Ok(rel.holds(args[0], args[1]))
    }
}

impl fmt::Display for TemporalRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemporalRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(r) = InstantRelation::ALL.into_iter().find(|r| r.name() == s) {
            return Ok(TemporalRelation::Instant(r));
        }
        s.parse().map(TemporalRelation::Interval)
    }
}

impl Serialize for TemporalRelation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for TemporalRelation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for IntervalRelation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(a: FrameNum, b: FrameNum) -> TimeRef {
        TimeRef::new(a, b).unwrap()
    }

    #[test]
    fn classification() {
        assert_eq!(TimeRef::instant(923).classify(), TimeKind::Instant);
        assert_eq!(t(923, 958).classify(), TimeKind::ProperInterval);
        let five = t(5, 5);
        assert!(five.is_interval() && !five.is_proper_interval() && five.is_instant());
        assert!(TimeRef::new(9, 3).is_err());
    }

    #[test]
    fn instant_relations() {
        let v = t(923, 958);
        assert_eq!(begins(v), TimeRef::instant(923));
        assert_eq!(ends(v), TimeRef::instant(958));
        assert!(!before(TimeRef::instant(5), TimeRef::instant(5)));
        assert!(before(TimeRef::instant(4), TimeRef::instant(5)));
        assert!(after(TimeRef::instant(6), TimeRef::instant(5)));
        assert!(!inside(923, v));
        assert!(inside(940, v));
        assert!(begins_or_in(923, v) && !begins_or_in(958, v));
        assert_eq!(time_between(3, 9), Some(t(3, 9)));
        assert_eq!(time_between(9, 3), None);
        assert!(is_time_between(t(3, 9), 3, 9));
    }

    #[test]
    fn inside_excludes_exactly_the_endpoints() {
        let v = t(923, 958);
        for i in 920..=960 {
            let brute = (924..=957).contains(&i);
            assert_eq!(inside(i, v), brute, "instant {i}");
        }
    }

    #[test]
    fn interval_examples() {
        assert!(interval_relation("int_before", t(1, 5), t(7, 9)).unwrap());
        assert!(interval_relation("int_meets", t(1, 5), t(5, 9)).unwrap());
        assert!(interval_relation("starts_or_during", t(1, 3), t(1, 9)).unwrap());
        assert!(!interval_relation("starts_or_during", t(1, 9), t(1, 9)).unwrap());
        assert!(!interval_relation("nonoverlap", t(1, 5), t(5, 9)).unwrap());
        assert!(interval_relation("nonoverlap", t(1, 4), t(5, 9)).unwrap());
        assert!(interval_relation("int_earlier", t(1, 4), t(5, 9)).unwrap());
        assert!(matches!(
            interval_relation("int_sideways", t(1, 2), t(3, 4)),
            Err(Error::UnknownTemporalRelation(_))
        ));
    }

    #[test]
    fn named_dispatch_checks_arity() {
        let i = TimeRef::instant;
        assert!(TemporalRelation::eval_named("before", &[i(1), i(2)]).unwrap());
        assert!(TemporalRelation::eval_named("time_between", &[t(1, 4), i(1), i(4)]).unwrap());
        assert!(matches!(
            TemporalRelation::eval_named("before", &[i(1)]),
            Err(Error::TemporalArity { .. })
        ));
        assert!(matches!(
            TemporalRelation::eval_named("time_between", &[i(1), i(2)]),
            Err(Error::TemporalArity { .. })
        ));
    }

    #[test]
    fn instant_order_is_trichotomous() {
        for x in 0..8 {
            for y in 0..8 {
                let (a, b) = (TimeRef::instant(x), TimeRef::instant(y));
                let n = [before(a, b), after(a, b), a == b].iter().filter(|v| **v).count();
                assert_eq!(n, 1);
            }
        }
    }

    #[test]
    fn nonoverlap_excludes_overlap_during_equals() {
        for (a, b) in proper_pairs(0, 6) {
            if IntervalRelation::NonOverlap.holds(a, b) {
                for r in [AllenRelation::Overlaps, AllenRelation::During, AllenRelation::Equals] {
                    assert!(!IntervalRelation::Allen(r).holds(a, b));
                }
            }
        }
    }

    fn proper_pairs(lo: FrameNum, hi: FrameNum) -> Vec<(TimeRef, TimeRef)> {
        let mut ivs = Vec::new();
        for a in lo..=hi {
            for b in a + 1..=hi {
                ivs.push(t(a, b));
            }
        }
        let mut out = Vec::new();
        for &x in &ivs {
            for &y in &ivs {
                out.push((x, y));
            }
        }
        out
    }

    #[test]
    fn allen_partition_on_small_universe() {
        for (a, b) in proper_pairs(0, 6) {
            let holding: Vec<_> = AllenRelation::ALL
                .into_iter()
                .filter(|r| IntervalRelation::Allen(*r).holds(a, b))
                .collect();
            assert_eq!(holding.len(), 1, "{a} vs {b}: {holding:?}");
            let r = holding[0];
            assert!(IntervalRelation::Allen(r.converse()).holds(b, a));
        }
    }
}
