//! Multi-step event templates.
//!
//! An event is a list of frame-template steps that share variables, tied
//! together by temporal constraints between the steps' frames (instant
//! steps) or intervals (interval steps). The first listed step is the
//! anchor: it is searched first and grounds the variables that later steps,
//! in particular their not-exists lists, depend on. Later steps may lie
//! before or after the anchor in time.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::interval_sets::{iset_tsl, TimestampList};
use crate::kb::FactStore;
use crate::spatial::{self, RelationMode, RelationQuery, SpatialRelation};
use crate::temporal::{AllenRelation, IntervalRelation, TemporalRelation, TimeRef};
use crate::templates::{BindingIntervals, Bindings, FrameTemplate, Matcher, MatchResult, RelationAtom, Term, TypeSlot};
use crate::{EntityId, EntityType, Error, FrameNum, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    /// The step is a single frame.
    #[default]
    Instant,
    /// The step is a maximal run of frames matched under one binding.
    Interval,
}

fn default_threshold() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStep {
    pub id: String,
    pub template: FrameTemplate,
    #[serde(default)]
    pub mode: StepMode,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl EventStep {
    pub fn instant(id: &str, template: FrameTemplate) -> Self {
        Self {
            id: id.to_string(),
            template,
            mode: StepMode::Instant,
            threshold: 1.0,
        }
    }
}

/// `before(F1,F2)`: a binary temporal relation between two steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TemporalConstraint {
    pub relation: TemporalRelation,
    pub a: String,
    pub b: String,
}

impl TemporalConstraint {
    pub fn new(relation: TemporalRelation, a: &str, b: &str) -> Self {
        Self {
            relation,
            a: a.to_string(),
            b: b.to_string(),
        }
    }
}

impl FromStr for TemporalConstraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidTemplate(format!("expected `relation(A,B)`, got `{s}`"));
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let (a, b) = args.split_once(',').ok_or_else(bad)?;
        if b.contains(',') {
            return Err(Error::TemporalArity {
                name: name.trim().into(),
                expected: 2,
                got: args.split(',').count(),
            });
        }
        Ok(Self::new(name.parse()?, a.trim(), b.trim()))
    }
}

impl TryFrom<String> for TemporalConstraint {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TemporalConstraint> for String {
    fn from(c: TemporalConstraint) -> String {
        c.to_string()
    }
}

impl fmt::Display for TemporalConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.relation, self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTemplate {
    pub id: String,
    pub steps: Vec<EventStep>,
    #[serde(default)]
    pub constraints: Vec<TemporalConstraint>,
}

impl EventTemplate {
    pub fn step_index(&self, id: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::InvalidTemplate("event id is empty".into()));
        }
        if self.steps.is_empty() {
            return Err(Error::InvalidTemplate(format!("event `{}` has no steps", self.id)));
        }
        let mut bound: BTreeSet<&str> = BTreeSet::new();
        for (i, step) in self.steps.iter().enumerate() {
            if self.steps[..i].iter().any(|s| s.id == step.id) {
                return Err(Error::DuplicateId(step.id.clone()));
            }
            step.template.validate()?;
            if !(0.0..=1.0).contains(&step.threshold) {
                return Err(Error::InvalidMatchThreshold(step.threshold));
            }
            for t in &step.template.not_exists {
                if let Term::Var(v) = t {
                    if !bound.contains(v.as_str()) {
                        return Err(Error::UnboundNotExists(v.clone()));
                    }
                }
            }
            bound.extend(step.template.variables());
        }
        for c in &self.constraints {
            for s in [&c.a, &c.b] {
                if self.step_index(s).is_none() {
                    return Err(Error::InvalidTemplate(format!("constraint {c} names unknown step `{s}`")));
                }
            }
            if c.a == c.b {
                return Err(Error::InvalidTemplate(format!("constraint {c} relates a step to itself")));
            }
        }
        Ok(())
    }
}

/// Reads an event template document (JSON) and validates it.
pub fn parse_event_template(text: &str) -> Result<EventTemplate> {
    let ev: EventTemplate = serde_json::from_str(text)?;
    ev.validate()?;
    Ok(ev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step: String,
    pub time: TimeRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub event: String,
    pub bindings: Bindings,
    /// One entry per step, in template order.
    pub steps: Vec<StepResult>,
    /// First frame of the anchor step.
    pub anchor_frame: FrameNum,
    /// Last frame any step reaches; the detection is complete from here on.
    pub detected_at: FrameNum,
}

impl Detection {
    pub fn step(&self, id: &str) -> Option<TimeRef> {
        self.steps.iter().find(|s| s.step == id).map(|s| s.time)
    }

    /// Stable identity used to avoid recording a detection twice.
    pub fn key(&self) -> String {
        let b: Vec<String> = self.bindings.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}|{}|{}", self.event, b.join(","), self.anchor_frame)
    }
}

impl fmt::Display for Detection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.event)?;
        for (k, v) in &self.bindings {
            write!(f, " {k}={v}")?;
        }
        for s in &self.steps {
            if s.time.is_instant() {
                write!(f, " {}={}", s.step, s.time.begin)?;
            } else {
                write!(f, " {}={}", s.step, s.time)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Stop at the first detection.
    #[default]
    First,
    /// Every detection, with trivial variants collapsed.
    All,
}

impl FromStr for SearchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(SearchMode::First),
            "all" => Ok(SearchMode::All),
            other => Err(Error::InvalidTemplate(format!("unknown search mode `{other}`"))),
        }
    }
}

/// Counters describing the work done by an evaluator.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalStats {
    /// Frames on which the anchor step was matched.
    pub anchor_frames: u64,
    pub lowest_anchor_frame: Option<FrameNum>,
    pub highest_anchor_frame: Option<FrameNum>,
    /// Candidate step results tried below the anchor.
    pub candidates: u64,
}

impl EvalStats {
    fn anchor(&mut self, f: FrameNum) {
        self.anchor_frames += 1;
        self.lowest_anchor_frame = Some(self.lowest_anchor_frame.map_or(f, |x| x.min(f)));
        self.highest_anchor_frame = Some(self.highest_anchor_frame.map_or(f, |x| x.max(f)));
    }
}

type MemoKey = (usize, FrameNum, Vec<(String, EntityId)>);

/// Evaluates event templates against one store.
///
/// Step matches are memoized for the evaluator's lifetime, so an evaluator
/// should not outlive the store snapshot it reads.
pub struct Evaluator<'a> {
    matcher: Matcher<'a>,
    stats: RefCell<EvalStats>,
    frame_memo: RefCell<HashMap<MemoKey, Rc<Vec<MatchResult>>>>,
    interval_memo: RefCell<HashMap<(usize, Vec<(String, EntityId)>), Rc<Vec<BindingIntervals>>>>,
}

struct Search<'e> {
    ev: &'e EventTemplate,
    mode: SearchMode,
    /// Constraints as step index pairs.
    constraints: Vec<(TemporalRelation, usize, usize)>,
    /// Whether any step after `k` binds a variable not bound by steps `0..=k`.
    binds_later: Vec<bool>,
    /// Variables each step's matcher needs to see: type-list and not-exists.
    step_vars: Vec<BTreeSet<String>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(matcher: Matcher<'a>) -> Self {
        Self {
            matcher,
            stats: RefCell::default(),
            frame_memo: RefCell::default(),
            interval_memo: RefCell::default(),
        }
    }

    pub fn store(&self) -> &'a FactStore {
        self.matcher.store
    }

    pub fn matcher(&self) -> Matcher<'a> {
        self.matcher
    }

    pub fn stats(&self) -> EvalStats {
        self.stats.borrow().clone()
    }

    pub fn reset_stats(&self) {
        *self.stats.borrow_mut() = EvalStats::default();
    }

    fn restrict(b: &Bindings, vars: &BTreeSet<String>) -> Vec<(String, EntityId)> {
        vars.iter()
            .filter_map(|v| b.get(v).map(|e| (v.clone(), e.clone())))
            .collect()
    }

    fn frame_matches(&self, s: &Search<'_>, k: usize, f: FrameNum, b: &Bindings) -> Result<Rc<Vec<MatchResult>>> {
        let key = (k, f, Self::restrict(b, &s.step_vars[k]));
        if let Some(hit) = self.frame_memo.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let preset: Bindings = key.2.iter().cloned().collect();
        let step = &s.ev.steps[k];
        let r = Rc::new(self.matcher.match_frame_with(&step.template, f, step.threshold, &preset)?);
        self.frame_memo.borrow_mut().insert(key, r.clone());
        Ok(r)
    }

    fn interval_matches(&self, s: &Search<'_>, k: usize, b: &Bindings) -> Result<Rc<Vec<BindingIntervals>>> {
        let key = (k, Self::restrict(b, &s.step_vars[k]));
        if let Some(hit) = self.interval_memo.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let preset: Bindings = key.1.iter().cloned().collect();
        let step = &s.ev.steps[k];
        let r = Rc::new(self.matcher.iset_match_bindings_with(&step.template, step.threshold, &preset)?);
        self.interval_memo.borrow_mut().insert(key, r.clone());
        Ok(r)
    }

    /// Candidate results for step `k` under the current bindings, in search
    /// order: ascending time, then ascending bindings.
    fn candidates(
        &self,
        s: &Search<'_>,
        k: usize,
        b: &Bindings,
        times: &[Option<TimeRef>],
    ) -> Result<Vec<(TimeRef, Bindings)>> {
        let step = &s.ev.steps[k];
        let mut out = Vec::new();
        match step.mode {
            StepMode::Instant => {
                let Some((first, last)) = self.store().frame_range() else {
                    return Ok(out);
                };
                let (mut lo, mut hi) = (first, last);
                // Narrow the scan using before/after constraints against bound steps.
                for &(rel, x, y) in &s.constraints {
                    let (other, k_first) = if x == k { (y, true) } else if y == k { (x, false) } else { continue };
                    let Some(t) = times[other] else { continue };
                    let ordering = match rel {
                        TemporalRelation::Instant(crate::temporal::InstantRelation::Before)
                        | TemporalRelation::Interval(IntervalRelation::Allen(AllenRelation::Before)) => Some(true),
                        TemporalRelation::Instant(crate::temporal::InstantRelation::After)
                        | TemporalRelation::Interval(IntervalRelation::Allen(AllenRelation::After)) => Some(false),
                        _ => None,
                    };
                    match ordering {
                        // k strictly precedes `other`
                        Some(before) if before == k_first => {
                            if t.begin == 0 {
                                return Ok(out);
                            }
                            hi = hi.min(t.begin - 1);
                        }
                        Some(_) => lo = lo.max(t.end.saturating_add(1)),
                        None => {}
                    }
                }
                if lo > hi {
                    return Ok(out);
                }
                for f in lo..=hi {
                    for m in self.frame_matches(s, k, f, b)?.iter() {
                        let mut nb = b.clone();
                        nb.extend(m.bindings.iter().map(|(k, v)| (k.clone(), v.clone())));
                        out.push((TimeRef::instant(f), nb));
                    }
                }
            }
            StepMode::Interval => {
                for g in self.interval_matches(s, k, b)?.iter() {
                    let mut nb = b.clone();
                    nb.extend(g.bindings.iter().map(|(k, v)| (k.clone(), v.clone())));
                    for t in g.iset.members() {
                        out.push((*t, nb.clone()));
                    }
                }
                out.sort_by(|x, y| (x.0.begin, x.0.end, &x.1).cmp(&(y.0.begin, y.0.end, &y.1)));
            }
        }
        Ok(out)
    }

    fn consistent(s: &Search<'_>, k: usize, times: &[Option<TimeRef>]) -> bool {
        s.constraints.iter().all(|&(rel, x, y)| {
            if x != k && y != k {
                return true;
            }
            match (times[x], times[y]) {
                (Some(a), Some(b)) => rel.holds(a, b),
                _ => true,
            }
        })
    }

    fn descend(
        &self,
        s: &Search<'_>,
        k: usize,
        b: &Bindings,
        times: &mut Vec<Option<TimeRef>>,
        out: &mut Vec<(Bindings, Vec<TimeRef>)>,
    ) -> Result<()> {
        if k == s.ev.steps.len() {
            out.push((b.clone(), times.iter().map(|t| t.expect("all steps bound")).collect()));
            return Ok(());
        }
        let mut settled: HashSet<Bindings> = HashSet::new();
        for (t, nb) in self.candidates(s, k, b, times)? {
            if !s.binds_later[k] && settled.contains(&nb) {
                continue;
            }
            self.stats.borrow_mut().candidates += 1;
            times[k] = Some(t);
            if Self::consistent(s, k, times) {
                let before = out.len();
                self.descend(s, k + 1, &nb, times, out)?;
                if out.len() > before {
                    if s.mode == SearchMode::First {
                        times[k] = None;
                        return Ok(());
                    }
                    settled.insert(nb);
                }
            }
            times[k] = None;
        }
        Ok(())
    }

    fn search<'e>(&self, ev: &'e EventTemplate, mode: SearchMode) -> Result<Search<'e>> {
        ev.validate()?;
        let constraints = ev
            .constraints
            .iter()
            .map(|c| (c.relation, ev.step_index(&c.a).unwrap(), ev.step_index(&c.b).unwrap()))
            .collect();
        let n = ev.steps.len();
        let mut binds_later = vec![false; n];
        let mut bound: BTreeSet<&str> = BTreeSet::new();
        let mut prefix_bound = Vec::with_capacity(n);
        for st in &ev.steps {
            bound.extend(st.template.variables());
            prefix_bound.push(bound.clone());
        }
        for k in 0..n {
            binds_later[k] = ev.steps[k + 1..]
                .iter()
                .any(|st| st.template.variables().any(|v| !prefix_bound[k].contains(v)));
        }
        let step_vars = ev
            .steps
            .iter()
            .map(|st| {
                st.template
                    .variables()
                    .map(str::to_string)
                    .chain(st.template.not_exists.iter().filter_map(|t| t.as_var().map(str::to_string)))
                    .collect()
            })
            .collect();
        Ok(Search {
            ev,
            mode,
            constraints,
            binds_later,
            step_vars,
        })
    }

    /// Searches for detections of `ev`.
    ///
    /// With a cursor, only anchor results starting after the cursor are
    /// explored; the other steps still search the whole store. In `All`
    /// mode, results that differ only in the non-anchor steps, or whose
    /// anchors fall in one contiguous run of anchor frames under the same
    /// bindings, are collapsed to the earliest one.
    pub fn evaluate(&self, ev: &EventTemplate, mode: SearchMode, cursor: Option<FrameNum>) -> Result<Vec<Detection>> {
        let s = self.search(ev, mode)?;
        let store = self.store();
        let mut detections = Vec::new();
        let Some((first, last)) = store.frame_range() else {
            return Ok(detections);
        };
        let start = match cursor {
            Some(c) if c >= last => return Ok(detections),
            Some(c) => (c + 1).max(first),
            None => first,
        };

        // Anchor candidates in ascending time.
        let anchor = &ev.steps[0];
        let mut anchors: Vec<(TimeRef, Bindings)> = Vec::new();
        match anchor.mode {
            StepMode::Instant => {
                for f in start..=last {
                    self.stats.borrow_mut().anchor(f);
                    for m in self.matcher.match_frame(&anchor.template, f, anchor.threshold)? {
                        anchors.push((TimeRef::instant(f), m.bindings));
                    }
                }
            }
            StepMode::Interval => {
                let mut times = vec![None; ev.steps.len()];
                let none = Bindings::new();
                for (t, b) in self.candidates(&s, 0, &none, &mut times)? {
                    if t.begin >= start {
                        self.stats.borrow_mut().anchor(t.begin);
                        anchors.push((t, b));
                    }
                }
            }
        }

        // Anchor bindings -> (last anchor frame, start of its run).
        let mut runs: HashMap<Bindings, (FrameNum, FrameNum)> = HashMap::new();
        let mut found: HashSet<(Bindings, FrameNum)> = HashSet::new();
        for (t, ab) in anchors {
            let episode = match anchor.mode {
                StepMode::Instant => {
                    let e = match runs.get(&ab) {
                        Some(&(prev, start)) if prev + 1 == t.begin => start,
                        _ => t.begin,
                    };
                    runs.insert(ab.clone(), (t.begin, e));
                    e
                }
                StepMode::Interval => t.begin,
            };
            if mode == SearchMode::All && !s.binds_later[0] && found.contains(&(ab.clone(), episode)) {
                continue;
            }
            let mut times = vec![None; ev.steps.len()];
            times[0] = Some(t);
            let mut sols = Vec::new();
            self.descend(&s, 1, &ab, &mut times, &mut sols)?;
            for (b, ts) in sols {
                if !found.insert((b.clone(), episode)) {
                    continue;
                }
                detections.push(Detection {
                    event: ev.id.clone(),
                    anchor_frame: ts[0].begin,
                    detected_at: ts.iter().map(|t| t.end).max().unwrap_or(ts[0].end),
                    steps: ev
                        .steps
                        .iter()
                        .zip(&ts)
                        .map(|(st, t)| StepResult {
                            step: st.id.clone(),
                            time: *t,
                        })
                        .collect(),
                    bindings: b,
                });
                if mode == SearchMode::First {
                    return Ok(detections);
                }
            }
        }
        Ok(detections)
    }

    /// Replays a detection: every step must match at its recorded time under
    /// the recorded bindings, and every constraint must hold.
    pub fn verify(&self, ev: &EventTemplate, det: &Detection) -> Result<bool> {
        ev.validate()?;
        let mut times = Vec::with_capacity(ev.steps.len());
        for step in &ev.steps {
            let Some(t) = det.step(&step.id) else {
                return Ok(false);
            };
            times.push(t);
            let agrees = |b: &Bindings| b.iter().all(|(k, v)| det.bindings.get(k) == Some(v));
            let ok = match step.mode {
                StepMode::Instant => {
                    t.is_instant()
                        && self
                            .matcher
                            .match_frame_with(&step.template, t.begin, step.threshold, &det.bindings)?
                            .iter()
                            .any(|m| agrees(&m.bindings))
                }
                StepMode::Interval => self
                    .matcher
                    .iset_match_bindings_with(&step.template, step.threshold, &det.bindings)?
                    .iter()
                    .any(|g| agrees(&g.bindings) && g.iset.members().contains(&t)),
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(ev.constraints.iter().all(|c| {
            let a = times[ev.step_index(&c.a).unwrap()];
            let b = times[ev.step_index(&c.b).unwrap()];
            c.relation.holds(a, b)
        }))
    }
}

pub fn evaluate_event(
    matcher: Matcher<'_>,
    ev: &EventTemplate,
    mode: SearchMode,
    cursor: Option<FrameNum>,
) -> Result<Vec<Detection>> {
    Evaluator::new(matcher).evaluate(ev, mode, cursor)
}

pub fn verify_detection(matcher: Matcher<'_>, ev: &EventTemplate, det: &Detection) -> Result<bool> {
    Evaluator::new(matcher).verify(ev, det)
}

// ---- built-in events --------------------------------------------------------------

fn slot(ty: EntityType, v: &str) -> TypeSlot {
    TypeSlot::new(ty, Term::var(v))
}

/// A person is seen near an object (anchor, `F2`), was earlier seen without
/// the object present (`F1`), and is later seen away from it (`F3`).
pub fn left_item_template() -> EventTemplate {
    let near = RelationQuery::positive(SpatialRelation::Near);
    let anchor = FrameTemplate::new(
        "left_item_anchor",
        vec![slot(EntityType::Person, "P"), slot(EntityType::Object, "O")],
        vec![RelationAtom::new(near, Term::var("P"), Term::var("O"))],
        vec![],
    );
    let prior = FrameTemplate::new(
        "left_item_prior",
        vec![slot(EntityType::Person, "P")],
        vec![],
        vec![Term::var("O")],
    );
    let after = FrameTemplate::new(
        "left_item_after",
        vec![slot(EntityType::Person, "P"), slot(EntityType::Object, "O")],
        vec![RelationAtom::new(RelationQuery::negative(SpatialRelation::Near), Term::var("P"), Term::var("O"))],
        vec![],
    );
    let before = TemporalRelation::Instant(crate::temporal::InstantRelation::Before);
    let after_rel = TemporalRelation::Instant(crate::temporal::InstantRelation::After);
    EventTemplate {
        id: "left_item".into(),
        steps: vec![
            EventStep::instant("F2", anchor),
            EventStep::instant("F1", prior),
            EventStep::instant("F3", after),
        ],
        constraints: vec![
            TemporalConstraint::new(before, "F1", "F2"),
            TemporalConstraint::new(after_rel, "F3", "F2"),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LeftItem {
    pub person: u64,
    pub object: u64,
    pub f1: FrameNum,
    pub f2: FrameNum,
    pub f3: FrameNum,
}

impl LeftItem {
    fn from_detection(d: &Detection) -> Option<Self> {
        let num = |v: &str| match d.bindings.get(v)? {
            EntityId::Num(n) => Some(*n),
            EntityId::Name(_) => None,
        };
        Some(Self {
            person: num("P")?,
            object: num("O")?,
            f1: d.step("F1")?.begin,
            f2: d.step("F2")?.begin,
            f3: d.step("F3")?.begin,
        })
    }
}

impl fmt::Display for LeftItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P = {}, O = {}, F1 = {}, F2 = {}, F3 = {}",
            self.person, self.object, self.f1, self.f2, self.f3
        )
    }
}

pub fn left_item(matcher: Matcher<'_>, mode: SearchMode) -> Result<Vec<LeftItem>> {
    Ok(evaluate_event(matcher, &left_item_template(), mode, None)?
        .iter()
        .filter_map(LeftItem::from_detection)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Loitering {
    pub id: EntityId,
    pub start: FrameNum,
    pub end: FrameNum,
}

impl fmt::Display for Loitering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ID = {}, Start = {}, End = {}", self.id, self.start, self.end)
    }
}

/// People overlapping a static `area` for more than `duration` frames, after
/// closing gaps of up to `2 * radius` frames in each person's presence.
pub fn loitering_in(matcher: Matcher<'_>, area: &EntityId, duration: FrameNum, radius: u32) -> Result<Vec<Loitering>> {
    let store = matcher.store;
    if store.static_entity(area).is_none() {
        return Err(Error::UnknownArea(area.clone()));
    }
    if duration == 0 {
        return Err(Error::InvalidTemplate("loitering duration must be positive".into()));
    }
    let overlapping = RelationQuery::positive(SpatialRelation::Overlapping);
    let mut stamps = Vec::new();
    match matcher.mode {
        RelationMode::Cached => {
            if store.cache_record().is_some() {
                for hit in store.query_cached(overlapping, Some(area), None, None)? {
                    stamps.push((hit.e2, hit.frame));
                }
            }
        }
        RelationMode::Entail => {
            for f in store.processed_frames() {
                for e in store.entities_in_frame(f) {
                    if spatial::eval_relation(store, overlapping, area, &e, f, &matcher.spatial)? {
                        stamps.push((e, f));
                    }
                }
            }
        }
    }
    stamps.retain(|(e, f)| store.entity_state(e, *f).is_some_and(|s| s.entity_type == EntityType::Person));
    let grouped = iset_tsl(&TimestampList::new(stamps));
    let mut out = Vec::new();
    for (id, iset) in &grouped.entries {
        for t in iset.close(radius).members() {
            if t.end - t.begin > duration {
                out.push(Loitering {
                    id: id.clone(),
                    start: t.begin,
                    end: t.end,
                });
            }
        }
    }
    Ok(out)
}

// ---- timeline ---------------------------------------------------------------------

/// A step's bar in the sequencing view, in layout coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineBar {
    pub step: String,
    pub x0: f64,
    pub x1: f64,
}

/// Relations offered by the timeline view.
pub const BAR_FUNCTORS: [AllenRelation; 7] = [
    AllenRelation::Equals,
    AllenRelation::Before,
    AllenRelation::During,
    AllenRelation::Starts,
    AllenRelation::Finishes,
    AllenRelation::Meets,
    AllenRelation::Overlaps,
];

/// Every relation from [`BAR_FUNCTORS`] that holds between two bars, for
/// every ordered pair of distinct bars. Layout coordinates only order the
/// bars; they carry no frame distances.
pub fn derive_temporal_constraints(bars: &[TimelineBar]) -> Result<Vec<TemporalConstraint>> {
    for (i, b) in bars.iter().enumerate() {
        if bars[..i].iter().any(|o| o.step == b.step) {
            return Err(Error::DuplicateId(b.step.clone()));
        }
        if !(b.x0 < b.x1) {
            return Err(Error::InvalidTemplate(format!("bar `{}` has no width", b.step)));
        }
    }
    let mut out = Vec::new();
    for a in bars {
        for b in bars {
            if a.step == b.step {
                continue;
            }
            for r in BAR_FUNCTORS {
                let rel = IntervalRelation::Allen(r);
                if rel.holds_on((a.x0, a.x1), (b.x0, b.x1)) {
                    out.push(TemporalConstraint::new(TemporalRelation::Interval(rel), &a.step, &b.step));
                }
            }
        }
    }
    Ok(out)
}

/// Step ids ordered as the user arranged them, for display.
pub fn bar_order(bars: &[TimelineBar]) -> Vec<String> {
    let mut v: Vec<&TimelineBar> = bars.iter().collect();
    v.sort_by(|a, b| a.x0.total_cmp(&b.x0).then(a.x1.total_cmp(&b.x1)));
    v.into_iter().map(|b| b.step.clone()).collect()
}

/// Detections keyed by event id, for grouping output.
pub fn group_by_event(ds: &[Detection]) -> BTreeMap<&str, Vec<&Detection>> {
    let mut m: BTreeMap<&str, Vec<&Detection>> = BTreeMap::new();
    for d in ds {
        m.entry(d.event.as_str()).or_default().push(d);
    }
    m
}
