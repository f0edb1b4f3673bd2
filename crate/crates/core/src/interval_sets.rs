//! Canonical interval sets over frames, timestamp lists, and smoothing.
//!
//! An [`IntervalSet`] is kept in canonical form: members are inclusive
//! `a--b` intervals, strictly ascending, and separated by at least one
//! uncovered frame. Consecutive frames always coalesce into one member.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::temporal::{IntervalRelation, TimeRef};
use crate::{EntityId, FrameNum};

/// Default closing radius used for smoothing.
pub const DEFAULT_SMOOTHING_RADIUS: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalSet {
    members: Vec<TimeRef>,
}

impl IntervalSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Canonical set covering exactly `frames` (any order, duplicates allowed).
    pub fn from_frames<I: IntoIterator<Item = FrameNum>>(frames: I) -> Self {
        let mut v: Vec<FrameNum> = frames.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        let mut members: Vec<TimeRef> = Vec::new();
        for f in v {
            match members.last_mut() {
                Some(last) if last.end + 1 == f => last.end = f,
                _ => members.push(TimeRef::instant(f)),
            }
        }
        Self { members }
    }

    /// Canonicalizes arbitrary intervals: sorts, then merges overlapping and
    /// adjacent members.
    pub fn from_intervals<I: IntoIterator<Item = TimeRef>>(intervals: I) -> Self {
        let mut v: Vec<TimeRef> = intervals.into_iter().collect();
        v.sort_unstable();
        let mut members: Vec<TimeRef> = Vec::with_capacity(v.len());
        for iv in v {
            match members.last_mut() {
                Some(last) if iv.begin <= last.end.saturating_add(1) => last.end = last.end.max(iv.end),
                _ => members.push(iv),
            }
        }
        Self { members }
    }

    pub fn members(&self) -> &[TimeRef] {
        &self.members
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Number of covered frames.
    pub fn coverage(&self) -> u64 {
        self.members.iter().map(|m| (m.end - m.begin) as u64 + 1).sum()
    }

    pub fn contains(&self, f: FrameNum) -> bool {
        let idx = self.members.partition_point(|m| m.end < f);
        self.members.get(idx).is_some_and(|m| m.begin <= f)
    }

    /// Every covered frame, ascending.
    pub fn expand(&self) -> Vec<FrameNum> {
        self.members.iter().flat_map(|m| m.begin..=m.end).collect()
    }

    /// Checks the canonical-form invariants.
    pub fn is_canonical(&self) -> bool {
        self.members.iter().all(|m| m.begin <= m.end)
            && self
                .members
                .windows(2)
                .all(|w| w[1].begin as u64 > w[0].end as u64 + 1)
    }

    /// Member pairs `(i1, i2)` with `i1 ∈ self`, `i2 ∈ other` for which
    /// `relation` holds, in lexicographic member order.
    pub fn find_intervals<'a>(
        &'a self,
        relation: IntervalRelation,
        other: &'a IntervalSet,
    ) -> impl Iterator<Item = (TimeRef, TimeRef)> + 'a {
        self.members.iter().flat_map(move |&a| {
            other
                .members
                .iter()
                .filter(move |&&b| relation.holds(a, b))
                .map(move |&b| (a, b))
        })
    }

    /// Morphological closing with the given radius: every member dilates to
    /// `[a - r, b + r]`, touching results merge, then each merged interval
    /// erodes back by `r`. Fills exactly the gaps of at most `2r` frames.
    pub fn close(&self, radius: u32) -> IntervalSet {
        if radius == 0 || self.members.is_empty() {
            return self.clone();
        }
        let r = radius as i64;
        let mut merged: Vec<(i64, i64)> = Vec::with_capacity(self.members.len());
        for m in &self.members {
            let (a, b) = (m.begin as i64 - r, m.end as i64 + r);
            match merged.last_mut() {
                Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        let members = merged
            .into_iter()
            .map(|(a, b)| TimeRef {
                begin: (a + r) as FrameNum,
                end: (b - r) as FrameNum,
            })
            .collect();
        IntervalSet { members }
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::from_intervals(self.members.iter().chain(other.members.iter()).copied())
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, m) in self.members.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str("]")
    }
}

/// `make_iset`: canonical interval set from a list of frames.
pub fn make_iset(frames: &[FrameNum]) -> IntervalSet {
    IntervalSet::from_frames(frames.iter().copied())
}

/// Key/frame pairs in no particular order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TimestampList {
    pub entries: Vec<(EntityId, FrameNum)>,
}

impl TimestampList {
    pub fn new(entries: Vec<(EntityId, FrameNum)>) -> Self {
        Self { entries }
    }

    /// Parses the `key-frame` notation, e.g. `[a-14, a-13, b-27]`.
    pub fn parse(text: &str) -> Option<Self> {
        let body = text.trim().strip_prefix('[')?.strip_suffix(']')?;
        let mut entries = Vec::new();
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, f) = item.rsplit_once('-')?;
            entries.push((EntityId::from(k.trim()), f.trim().parse().ok()?));
        }
        Some(Self { entries })
    }

    /// Sorted by key then frame; equal pairs stay adjacent.
    pub fn sort_group(&self) -> TimestampList {
        let mut entries = self.entries.clone();
        entries.sort();
        TimestampList { entries }
    }

    /// Groups frames per key into canonical interval sets, keys ascending.
    pub fn to_interval_sets(&self) -> IntervalSetTimestampList {
        let mut groups: BTreeMap<EntityId, Vec<FrameNum>> = BTreeMap::new();
        for (k, f) in &self.entries {
            groups.entry(k.clone()).or_default().push(*f);
        }
        IntervalSetTimestampList {
            entries: groups
                .into_iter()
                .map(|(k, frames)| (k, IntervalSet::from_frames(frames)))
                .collect(),
        }
    }
}

impl fmt::Display for TimestampList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (k, fr)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}-{fr}")?;
        }
        f.write_str("]")
    }
}

/// `tsl_sort_group`
pub fn tsl_sort_group(tsl: &TimestampList) -> TimestampList {
    tsl.sort_group()
}

/// `iset_tsl`
pub fn iset_tsl(tsl: &TimestampList) -> IntervalSetTimestampList {
    tsl.to_interval_sets()
}

/// Per-key interval sets with unique keys in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IntervalSetTimestampList {
    pub entries: Vec<(EntityId, IntervalSet)>,
}

impl IntervalSetTimestampList {
    pub fn get(&self, key: &EntityId) -> Option<&IntervalSet> {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(key))
            .ok()
            .map(|i| &self.entries[i].1)
    }
}

impl fmt::Display for IntervalSetTimestampList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (k, set)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}-{set}")?;
        }
        f.write_str("]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::AllenRelation;
    use proptest::prelude::*;

    fn iv(a: FrameNum, b: FrameNum) -> TimeRef {
        TimeRef::new(a, b).unwrap()
    }

    fn set(ivs: &[(FrameNum, FrameNum)]) -> IntervalSet {
        let s = IntervalSet::from_intervals(ivs.iter().map(|&(a, b)| iv(a, b)));
        assert!(s.is_canonical());
        s
    }

    /// Bit-string closing: dilate then erode a padded boolean window.
    pub(crate) fn bit_close(frames: &[FrameNum], r: u32, window: u32) -> Vec<FrameNum> {
        let pad = 2 * r as usize + 2;
        let n = window as usize + 1 + 2 * pad;
        let mut bits = vec![false; n];
        for &f in frames {
            bits[f as usize + pad] = true;
        }
        let r = r as usize;
        let dil: Vec<bool> = (0..n)
            .map(|i| (i.saturating_sub(r)..=(i + r).min(n - 1)).any(|j| bits[j]))
            .collect();
        let ero: Vec<bool> = (0..n)
            .map(|i| i >= r && i + r < n && (i - r..=i + r).all(|j| dil[j]))
            .collect();
        ero.iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| (i - pad) as FrameNum)
            .collect()
    }

    #[test]
    fn make_iset_examples() {
        assert_eq!(make_iset(&[3, 1, 2, 5]).to_string(), "[1--3, 5--5]");
        assert!(make_iset(&[]).is_empty());
        let frames: Vec<FrameNum> = (0..=437).chain(446..=450).chain(511..=516).collect();
        assert_eq!(make_iset(&frames).to_string(), "[0--437, 446--450, 511--516]");
    }

    #[test]
    fn expand_examples() {
        assert_eq!(set(&[(1, 3), (5, 5)]).expand(), [1, 2, 3, 5]);
        assert!(IntervalSet::new().expand().is_empty());
    }

    #[test]
    fn find_intervals_examples() {
        let s1 = set(&[(1, 2), (10, 12)]);
        let s2 = set(&[(5, 6)]);
        let before = IntervalRelation::Allen(AllenRelation::Before);
        let got: Vec<_> = s1.find_intervals(before, &s2).collect();
        assert_eq!(got, [(iv(1, 2), iv(5, 6))]);

        let s = set(&[(1, 2), (4, 9), (20, 20)]);
        let eq = IntervalRelation::Allen(AllenRelation::Equals);
        let got: Vec<_> = s.find_intervals(eq, &s).collect();
        assert_eq!(got, s.members().iter().map(|&m| (m, m)).collect::<Vec<_>>());
    }

    #[test]
    fn closing_examples() {
        let a = set(&[(3, 4), (6, 9), (14, 16)]);
        assert_eq!(a.close(1).to_string(), "[3--9, 14--16]");
        assert_eq!(a.close(0), a);
        let b = set(&[(0, 1), (4, 5)]);
        assert_eq!(b.close(1).to_string(), "[0--5]");
        assert_eq!(b.close(0).to_string(), "[0--1, 4--5]");
        assert_eq!(bit_close(&b.expand(), 1, 10), b.close(1).expand());
    }

    #[test]
    fn timestamp_list_example() {
        let tsl = TimestampList::parse("[a-14, a-13, a-12, b-27, a-99, a-100, b-50, c-15, c-16, c-29, d-100]").unwrap();
        assert_eq!(tsl.entries.len(), 11);
        assert_eq!(
            iset_tsl(&tsl).to_string(),
            "[a-[12--14, 99--100], b-[27--27, 50--50], c-[15--16, 29--29], d-[100--100]]"
        );
        assert_eq!(
            tsl_sort_group(&tsl).to_string(),
            "[a-12, a-13, a-14, a-99, a-100, b-27, b-50, c-15, c-16, c-29, d-100]"
        );
        assert!(iset_tsl(&TimestampList::default()).entries.is_empty());
    }

    #[test]
    fn sort_group_keeps_duplicates_adjacent() {
        let tsl = TimestampList::parse("[b-2, a-1, b-2, a-1]").unwrap();
        assert_eq!(tsl.sort_group().to_string(), "[a-1, a-1, b-2, b-2]");
        let sorted = TimestampList::parse("[a-1, a-2, b-0]").unwrap();
        assert_eq!(sorted.sort_group(), sorted);
    }

    #[test]
    fn numeric_keys_sort_numerically() {
        let tsl = TimestampList::parse("[10-1, 9-1, 2-5]").unwrap();
        assert_eq!(iset_tsl(&tsl).to_string(), "[2-[5--5], 9-[1--1], 10-[1--1]]");
    }

    fn frames_strategy() -> impl Strategy<Value = Vec<FrameNum>> {
        proptest::collection::vec(0u32..200, 0..80)
    }

    proptest! {
        #[test]
        fn make_expand_round_trip(frames in frames_strategy()) {
            let s = IntervalSet::from_frames(frames.iter().copied());
            prop_assert!(s.is_canonical());
            let mut sorted = frames.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(s.expand(), sorted);
            prop_assert_eq!(IntervalSet::from_frames(s.expand()), s);
        }

        #[test]
        fn closing_matches_bit_oracle(frames in frames_strategy(), r in 0u32..4) {
            let s = IntervalSet::from_frames(frames.iter().copied());
            let closed = s.close(r);
            prop_assert!(closed.is_canonical());
            prop_assert_eq!(closed.expand(), bit_close(&s.expand(), r, 200));
        }

        #[test]
        fn closing_laws(frames in frames_strategy(), r in 0u32..4) {
            let s = IntervalSet::from_frames(frames.iter().copied());
            let c = s.close(r);
            prop_assert_eq!(c.close(r), c.clone());
            prop_assert!(s.expand().iter().all(|f| c.contains(*f)));
            let c2 = s.close(r + 1);
            prop_assert!(c.expand().iter().all(|f| c2.contains(*f)));
        }

        #[test]
        fn find_intervals_is_filtered_cross_product(
            a in proptest::collection::vec(0u32..30, 0..12),
            b in proptest::collection::vec(0u32..30, 0..12),
            ri in 0usize..15,
        ) {
            let (s1, s2) = (IntervalSet::from_frames(a), IntervalSet::from_frames(b));
            let rel = IntervalRelation::ALL[ri];
            let mut brute = Vec::new();
            for &x in s1.members() {
                for &y in s2.members() {
                    if rel.holds(x, y) { brute.push((x, y)); }
                }
            }
            prop_assert_eq!(s1.find_intervals(rel, &s2).collect::<Vec<_>>(), brute);
        }

        #[test]
        fn tsl_preserves_distinct_pairs(entries in proptest::collection::vec((0u64..5, 0u32..40), 0..60)) {
            let tsl = TimestampList::new(entries.iter().map(|&(k, f)| (EntityId::Num(k), f)).collect());
            let grouped = iset_tsl(&tsl);
            let total: u64 = grouped.entries.iter().map(|(_, s)| s.coverage()).sum();
            let mut distinct = entries.clone();
            distinct.sort_unstable();
            distinct.dedup();
            prop_assert_eq!(total, distinct.len() as u64);
            prop_assert!(grouped.entries.windows(2).all(|w| w[0].0 < w[1].0));
        }
    }
}
