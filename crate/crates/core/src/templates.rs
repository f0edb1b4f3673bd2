//! Frame signatures, frame templates and match queries.
//!
//! A frame template names typed entity slots, a list of (possibly negated)
//! spatial relations among them, and entities that must be absent. A binding
//! of the slots matches a frame when every slot is filled by a distinct
//! entity of the right type, no not-exists entity is present, and the share
//! of relations that hold reaches the threshold.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::interval_sets::{make_iset, IntervalSet};
use crate::kb::FactStore;
use crate::spatial::{self, RelationMode, RelationQuery, SpatialConfig};
use crate::{EntityId, EntityType, Error, FrameNum, Result};

/// Scores within this distance of the threshold count as reaching it.
const SCORE_EPS: f64 = 1e-9;

pub type Bindings = BTreeMap<String, EntityId>;

/// A variable (leading uppercase letter or `_`) or an entity constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Term {
    Var(String),
    Const(EntityId),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    /// The entity this term denotes under `bindings`, if any.
    pub fn resolve<'a>(&'a self, bindings: &'a Bindings) -> Option<&'a EntityId> {
        match self {
            Term::Const(e) => Some(e),
            Term::Var(v) => bindings.get(v),
        }
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.chars().next() {
            None => Err(Error::InvalidTemplate("empty term".into())),
            Some(c) if c.is_uppercase() || c == '_' => Ok(Term::Var(s.to_string())),
            Some(_) => Ok(Term::Const(s.parse().expect("infallible"))),
        }
    }
}

impl TryFrom<String> for Term {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Term> for String {
    fn from(t: Term) -> String {
        t.to_string()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(e) => write!(f, "{e}"),
        }
    }
}

/// `person:P1`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TypeSlot {
    pub entity_type: EntityType,
    pub term: Term,
}

impl TypeSlot {
    pub fn new(entity_type: EntityType, term: Term) -> Self {
        Self { entity_type, term }
    }
}

impl FromStr for TypeSlot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (ty, term) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidTemplate(format!("expected `type:Term`, got `{s}`")))?;
        Ok(Self {
            entity_type: ty.trim().parse()?,
            term: term.parse()?,
        })
    }
}

impl TryFrom<String> for TypeSlot {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TypeSlot> for String {
    fn from(t: TypeSlot) -> String {
        t.to_string()
    }
}

impl fmt::Display for TypeSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.entity_type, self.term)
    }
}

/// `near_kb(O1,P1)`, `not_near_kb(P,O)`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RelationAtom {
    pub relation: RelationQuery,
    pub a: Term,
    pub b: Term,
}

impl RelationAtom {
    pub fn new(relation: RelationQuery, a: Term, b: Term) -> Self {
        Self { relation, a, b }
    }
}

impl FromStr for RelationAtom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidTemplate(format!("expected `relation(A,B)`, got `{s}`"));
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let (a, b) = args.split_once(',').ok_or_else(bad)?;
        Ok(Self {
            relation: name.parse()?,
            a: a.parse()?,
            b: b.parse()?,
        })
    }
}

impl TryFrom<String> for RelationAtom {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RelationAtom> for String {
    fn from(r: RelationAtom) -> String {
        r.to_string()
    }
}

impl fmt::Display for RelationAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.relation.kb_name(), self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTemplate {
    pub id: String,
    pub type_list: Vec<TypeSlot>,
    #[serde(default)]
    pub relations: Vec<RelationAtom>,
    #[serde(default)]
    pub not_exists: Vec<Term>,
    /// Default match threshold when the caller does not give one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl FrameTemplate {
    pub fn new(id: &str, type_list: Vec<TypeSlot>, relations: Vec<RelationAtom>, not_exists: Vec<Term>) -> Self {
        Self {
            id: id.to_string(),
            type_list,
            relations,
            not_exists,
            threshold: None,
        }
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = Some(t);
        self
    }

    /// Variables named in the type list, in order.
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.type_list.iter().filter_map(|s| s.term.as_var())
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::InvalidTemplate("template id is empty".into()));
        }
        let mut seen = Vec::new();
        for slot in &self.type_list {
            if seen.contains(&&slot.term) {
                return Err(Error::InvalidTemplate(format!("`{}` appears twice in the type list", slot.term)));
            }
            seen.push(&slot.term);
        }
        for r in &self.relations {
            for t in [&r.a, &r.b] {
                if matches!(t, Term::Var(_)) && !seen.contains(&t) {
                    return Err(Error::InvalidTemplate(format!(
                        "`{t}` in {r} is not declared in the type list"
                    )));
                }
            }
            if r.a == r.b {
                return Err(Error::InvalidTemplate(format!("{r} relates a term to itself")));
            }
        }
        for t in &self.not_exists {
            if seen.contains(&t) {
                return Err(Error::InvalidTemplate(format!("`{t}` is both required and forbidden")));
            }
        }
        if let Some(th) = self.threshold {
            check_threshold(th)?;
        }
        Ok(())
    }

    /// Renders bindings as a typed entity list, e.g. `[object:4, person:3]`.
    pub fn describe_bindings(&self, b: &Bindings) -> String {
        let parts: Vec<String> = self
            .type_list
            .iter()
            .filter_map(|s| s.term.resolve(b).map(|e| format!("{}:{}", s.entity_type, e)))
            .collect();
        format!("[{}]", parts.join(", "))
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for FrameTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "frametemplate({}, [{}], [{}], [{}])",
            self.id,
            join(&self.type_list),
            join(&self.relations),
            join(&self.not_exists)
        )
    }
}

/// Splits on commas that are not nested in brackets or parentheses.
fn split_top(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = s[start..].trim();
    if !last.is_empty() || !out.is_empty() {
        out.push(last);
    }
    out
}

fn parse_list<T: FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::InvalidTemplate(format!("expected a [list], got `{s}`")))?;
    split_top(inner).into_iter().filter(|p| !p.is_empty()).map(str::parse).collect()
}

impl FromStr for FrameTemplate {
    type Err = Error;

    /// Parses the textual form `frametemplate(id, [slots], [relations], [absent])`.
    fn from_str(s: &str) -> Result<Self> {
        let body = s
            .trim()
            .trim_end_matches('.')
            .strip_prefix("frametemplate(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::InvalidTemplate("expected `frametemplate(...)`".into()))?;
        let parts = split_top(body);
        if parts.len() != 4 {
            return Err(Error::InvalidTemplate(format!("expected 4 arguments, got {}", parts.len())));
        }
        let t = FrameTemplate::new(parts[0], parse_list(parts[1])?, parse_list(parts[2])?, parse_list(parts[3])?);
        t.validate()?;
        Ok(t)
    }
}

/// Reads a template file: a JSON document, or the textual form.
pub fn parse_frame_template(text: &str) -> Result<FrameTemplate> {
    let t: FrameTemplate = if text.trim_start().starts_with('{') {
        serde_json::from_str(text)?
    } else {
        text.parse()?
    };
    t.validate()?;
    Ok(t)
}

fn check_threshold(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::InvalidMatchThreshold(t))
    }
}

// ---- signatures -------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameSignature {
    pub frame: FrameNum,
    pub entries: Vec<(EntityType, EntityId)>,
}

impl fmt::Display for FrameSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|(t, e)| format!("{t}:{e}")).collect();
        write!(f, "frame_sig({}, [{}])", self.frame, parts.join(", "))
    }
}

/// Dynamic entities of a processed frame sorted by type, then id.
pub fn frame_signature(store: &FactStore, frame: FrameNum) -> Result<FrameSignature> {
    store.ensure_processed(frame)?;
    let mut entries: Vec<(EntityType, EntityId)> = store
        .frame_facts(frame)
        .map(|f| (f.entity_type, f.entity.clone()))
        .collect();
    entries.sort();
    Ok(FrameSignature { frame, entries })
}

// ---- matching ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub frame: FrameNum,
    pub bindings: Bindings,
    pub score: f64,
}

/// Matching frames grouped by identical bindings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BindingIntervals {
    pub bindings: Bindings,
    pub iset: IntervalSet,
}

/// Evaluates templates against a store, reading relations from the cache
/// or recomputing them from basic facts.
#[derive(Debug, Clone, Copy)]
pub struct Matcher<'a> {
    pub store: &'a FactStore,
    pub spatial: SpatialConfig,
    pub mode: RelationMode,
}

struct Plan<'t> {
    t: &'t FrameTemplate,
    threshold: f64,
    /// Relations whose last argument becomes bound at slot `k`; index 0 holds
    /// relations bound before any slot.
    ready: Vec<Vec<&'t RelationAtom>>,
}

impl<'a> Matcher<'a> {
    pub fn new(store: &'a FactStore, spatial: SpatialConfig, mode: RelationMode) -> Self {
        Self { store, spatial, mode }
    }

    pub fn cached(store: &'a FactStore) -> Self {
        Self::new(store, SpatialConfig::default(), RelationMode::Cached)
    }

    fn plan<'t>(&self, t: &'t FrameTemplate, threshold: f64, preset: &Bindings) -> Result<Plan<'t>> {
        check_threshold(threshold)?;
        t.validate()?;
        for term in &t.not_exists {
            if let Term::Var(v) = term {
                if !preset.contains_key(v) {
                    return Err(Error::UnboundNotExists(v.clone()));
                }
            }
        }
        if self.mode == RelationMode::Cached && !t.relations.is_empty() && self.store.cache_record().is_some() {
            self.store.check_threshold(&self.spatial)?;
            for r in &t.relations {
                let (stored, _, _) = r.relation.relation.cached_form();
                if !self.store.cache_record().is_some_and(|c| c.functors.contains(&stored)) {
                    return Err(Error::NotCached(r.relation.relation.name().into()));
                }
            }
        }
        let slot_of = |term: &Term| -> usize {
            match term {
                Term::Var(v) if !preset.contains_key(v) => {
                    1 + t.type_list.iter().position(|s| &s.term == term).expect("validated")
                }
                _ => 0,
            }
        };
        let mut ready = vec![Vec::new(); t.type_list.len() + 1];
        for r in &t.relations {
            ready[slot_of(&r.a).max(slot_of(&r.b))].push(r);
        }
        Ok(Plan { t, threshold, ready })
    }

    fn relation_holds(&self, r: &RelationAtom, b: &Bindings, frame: FrameNum) -> bool {
        let (Some(x), Some(y)) = (r.a.resolve(b), r.b.resolve(b)) else {
            return false;
        };
        match self.mode {
            RelationMode::Cached => self.store.cached_holds(r.relation, x, y, frame).unwrap_or(false),
            RelationMode::Entail => {
                spatial::eval_relation(self.store, r.relation, x, y, frame, &self.spatial).unwrap_or(false)
            }
        }
    }

    fn run_frame(&self, plan: &Plan<'_>, frame: FrameNum, preset: &Bindings, out: &mut Vec<MatchResult>) {
        let t = plan.t;
        if t.not_exists.iter().any(|term| term.resolve(preset).is_some_and(|e| self.store.exists(e, frame))) {
            return;
        }
        // Candidate entities per slot, ascending.
        let present = self.store.entities_present(frame);
        let mut candidates: Vec<Vec<EntityId>> = Vec::with_capacity(t.type_list.len());
        for slot in &t.type_list {
            let fits = |e: &EntityId| {
                self.store
                    .entity_state(e, frame)
                    .is_some_and(|s| s.entity_type == slot.entity_type)
            };
            let c: Vec<EntityId> = match slot.term.resolve(preset) {
                Some(e) => fits(e).then(|| e.clone()).into_iter().collect(),
                None => present.iter().filter(|e| fits(e)).cloned().collect(),
            };
            if c.is_empty() {
                return;
            }
            candidates.push(c);
        }
        let total = t.relations.len();
        let mut b = preset.clone();
        let fails = plan.ready[0].iter().filter(|r| !self.relation_holds(r, &b, frame)).count();
        let mut used = Vec::with_capacity(t.type_list.len());
        self.descend(plan, frame, &candidates, 0, &mut b, &mut used, fails, total, out);
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        plan: &Plan<'_>,
        frame: FrameNum,
        candidates: &[Vec<EntityId>],
        k: usize,
        b: &mut Bindings,
        used: &mut Vec<EntityId>,
        fails: usize,
        total: usize,
        out: &mut Vec<MatchResult>,
    ) {
        let score = |f: usize| if total == 0 { 1.0 } else { (total - f) as f64 / total as f64 };
        if score(fails) + SCORE_EPS < plan.threshold {
            return;
        }
        if k == candidates.len() {
            let bindings = plan
                .t
                .variables()
                .filter_map(|v| b.get(v).map(|e| (v.to_string(), e.clone())))
                .collect();
            out.push(MatchResult {
                frame,
                bindings,
                score: score(fails),
            });
            return;
        }
        let slot = &plan.t.type_list[k];
        for e in &candidates[k] {
            if used.contains(e) {
                continue;
            }
            let fresh = match &slot.term {
                Term::Var(v) if !b.contains_key(v) => {
                    b.insert(v.clone(), e.clone());
                    Some(v.clone())
                }
                _ => None,
            };
            used.push(e.clone());
            let more = plan.ready[k + 1].iter().filter(|r| !self.relation_holds(r, b, frame)).count();
            self.descend(plan, frame, candidates, k + 1, b, used, fails + more, total, out);
            used.pop();
            if let Some(v) = fresh {
                b.remove(&v);
            }
        }
    }

    pub fn match_frame(&self, t: &FrameTemplate, frame: FrameNum, threshold: f64) -> Result<Vec<MatchResult>> {
        self.match_frame_with(t, frame, threshold, &Bindings::new())
    }

    /// Matches one frame with some variables already bound, as when a
    /// template is one step of an event.
    pub fn match_frame_with(
        &self,
        t: &FrameTemplate,
        frame: FrameNum,
        threshold: f64,
        preset: &Bindings,
    ) -> Result<Vec<MatchResult>> {
        let plan = self.plan(t, threshold, preset)?;
        self.store.ensure_processed(frame)?;
        let mut out = Vec::new();
        self.run_frame(&plan, frame, preset, &mut out);
        Ok(out)
    }

    /// Lazily yields matches over every processed frame in ascending order.
    pub fn matches<'t>(
        &'t self,
        t: &'t FrameTemplate,
        threshold: f64,
        preset: &'t Bindings,
    ) -> Result<impl Iterator<Item = MatchResult> + 't> {
        let plan = self.plan(t, threshold, preset)?;
        Ok(self.store.processed_frames().flat_map(move |f| {
            let mut out = Vec::new();
            self.run_frame(&plan, f, preset, &mut out);
            out
        }))
    }

    pub fn first_match(&self, t: &FrameTemplate, threshold: f64) -> Result<Option<MatchResult>> {
        let none = Bindings::new();
        let first = self.matches(t, threshold, &none)?.next();
        Ok(first)
    }

    pub fn match_all(&self, t: &FrameTemplate, threshold: f64) -> Result<Vec<MatchResult>> {
        let none = Bindings::new();
        let all = self.matches(t, threshold, &none)?.collect();
        Ok(all)
    }

    /// Interval set of every frame with at least one match.
    pub fn iset_match(&self, t: &FrameTemplate, threshold: f64) -> Result<IntervalSet> {
        let frames: Vec<FrameNum> = self.match_all(t, threshold)?.iter().map(|m| m.frame).collect();
        Ok(make_iset(&frames))
    }

    pub fn iset_match_bindings(&self, t: &FrameTemplate, threshold: f64) -> Result<Vec<BindingIntervals>> {
        self.iset_match_bindings_with(t, threshold, &Bindings::new())
    }

    /// Matching frames grouped by binding, in order of first match.
    pub fn iset_match_bindings_with(
        &self,
        t: &FrameTemplate,
        threshold: f64,
        preset: &Bindings,
    ) -> Result<Vec<BindingIntervals>> {
        let mut order: Vec<Bindings> = Vec::new();
        let mut frames: BTreeMap<Bindings, Vec<FrameNum>> = BTreeMap::new();
        for m in self.matches(t, threshold, preset)? {
            let entry = frames.entry(m.bindings.clone()).or_default();
            if entry.is_empty() {
                order.push(m.bindings);
            }
            if entry.last() != Some(&m.frame) {
                entry.push(m.frame);
            }
        }
        Ok(order
            .into_iter()
            .map(|b| {
                let iset = make_iset(&frames[&b]);
                BindingIntervals { bindings: b, iset }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvml::{parse_cvml, FrameProcessor};
    use crate::geometry::BoxSpec;
    use crate::kb::EntityFrameFacts;
    use crate::spatial::{SpatialRelation, DEFAULT_CACHED};
    use proptest::prelude::*;

    fn sample_store() -> FactStore {
        let mut s = FactStore::new();
        FrameProcessor::default()
            .process_dataset(&mut s, &parse_cvml(crate::LEFT_BAG_SAMPLE).unwrap())
            .unwrap();
        s
    }

    fn slot(s: &str) -> TypeSlot {
        s.parse().unwrap()
    }

    fn rel(s: &str) -> RelationAtom {
        s.parse().unwrap()
    }

    fn ingest(store: &mut FactStore, frame: FrameNum, items: &[(u64, EntityType, BoxSpec)]) {
        for (id, ty, b) in items {
            store
                .assert_entity_facts(EntityFrameFacts::from_box((*id).into(), frame, *ty, *b, 0.0))
                .unwrap();
        }
        spatial::entail_frame(store, frame, &DEFAULT_CACHED, &SpatialConfig::default()).unwrap();
        store.set_high_water(frame).unwrap();
    }

    #[test]
    fn textual_form_round_trips() {
        let text = "frametemplate(f1, [object:O1, person:P1], [near_kb(O1,P1)], [])";
        let t: FrameTemplate = text.parse().unwrap();
        assert_eq!(t.to_string(), text);
        assert_eq!(t.relations[0].relation, RelationQuery::positive(SpatialRelation::Near));
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"near_kb(O1,P1)\""), "{json}");
        assert_eq!(parse_frame_template(&json).unwrap(), t);
        let neg = "frametemplate(f, [person:P], [], [O])".parse::<FrameTemplate>();
        assert!(neg.is_ok());
    }

    #[test]
    fn invalid_templates_are_rejected() {
        assert!("frametemplate(f, [person:P], [near_kb(P,Q)], [])".parse::<FrameTemplate>().is_err());
        assert!("frametemplate(f, [person:P, person:P], [], [])".parse::<FrameTemplate>().is_err());
        assert!("frametemplate(f, [person:P], [], [P])".parse::<FrameTemplate>().is_err());
        assert!("frametemplate(f, [robot:P], [], [])".parse::<FrameTemplate>().is_err());
        assert!("frametemplate(f, [person:P], [beside_kb(P,3)], [])".parse::<FrameTemplate>().is_err());
    }

    #[test]
    fn signature_of_sample_frame() {
        let s = sample_store();
        let sig = frame_signature(&s, 0).unwrap();
        let ids: Vec<String> = sig.entries.iter().map(|(_, e)| e.to_string()).collect();
        assert_eq!(ids, ["0", "1", "2"]);
        assert!(sig.entries.iter().all(|(t, _)| *t == EntityType::Person));
        assert_eq!(sig.to_string(), "frame_sig(0, [person:0, person:1, person:2])");
        assert!(frame_signature(&s, 2).is_err());
    }

    #[test]
    fn signature_sorted_by_type_then_id() {
        let mut s = FactStore::new();
        let b = BoxSpec::new(0.0, 0.0, 1.0, 1.0);
        ingest(&mut s, 0, &[(9, EntityType::Person, b), (5, EntityType::Person, b), (7, EntityType::Object, b)]);
        let sig = frame_signature(&s, 0).unwrap();
        assert_eq!(sig.to_string(), "frame_sig(0, [object:7, person:5, person:9])");
    }

    #[test]
    fn unconstrained_pairs_give_six_bindings() {
        let s = sample_store();
        let t = FrameTemplate::new("pp", vec![slot("person:P1"), slot("person:P2")], vec![], vec![]);
        let m = Matcher::cached(&s).match_frame(&t, 0, 1.0).unwrap();
        assert_eq!(m.len(), 6);
        assert!(m.iter().all(|r| r.score == 1.0 && r.bindings["P1"] != r.bindings["P2"]));
        let firsts: Vec<String> = m.iter().map(|r| format!("{}{}", r.bindings["P1"], r.bindings["P2"])).collect();
        assert_eq!(firsts, ["01", "02", "10", "12", "20", "21"]);
    }

    /// Two entities placed so that exactly three of four relations hold.
    fn three_of_four() -> (FactStore, FrameTemplate) {
        let mut s = FactStore::new();
        ingest(
            &mut s,
            0,
            &[
                (1, EntityType::Person, BoxSpec::new(100.0, 100.0, 20.0, 40.0)),
                (2, EntityType::Object, BoxSpec::new(120.0, 110.0, 10.0, 10.0)),
            ],
        );
        let t = FrameTemplate::new(
            "t",
            vec![slot("person:P"), slot("object:O")],
            vec![rel("near_kb(P,O)"), rel("moreLeft_kb(P,O)"), rel("higher_kb(P,O)"), rel("above_kb(P,O)")],
            vec![],
        );
        (s, t)
    }

    #[test]
    fn partial_match_boundary() {
        let (s, t) = three_of_four();
        let m = Matcher::cached(&s);
        let at = m.match_frame(&t, 0, 0.75).unwrap();
        assert_eq!(at.len(), 1);
        assert_eq!(at[0].score, 0.75);
        assert!(m.match_frame(&t, 0, 0.8).unwrap().is_empty());
        assert!(m.match_frame(&t, 0, 1.0).unwrap().is_empty());
        assert!(matches!(m.match_frame(&t, 0, 1.01), Err(Error::InvalidMatchThreshold(_))));
    }

    #[test]
    fn not_exists_needs_a_bound_variable() {
        let s = sample_store();
        let t = FrameTemplate::new("p", vec![slot("person:P")], vec![], vec![Term::var("O")]);
        let m = Matcher::cached(&s);
        assert!(matches!(m.match_frame(&t, 0, 1.0), Err(Error::UnboundNotExists(_))));
        let mut preset = Bindings::new();
        preset.insert("O".into(), 2.into());
        assert!(m.match_frame_with(&t, 0, 1.0, &preset).unwrap().is_empty());
        preset.insert("O".into(), 42.into());
        assert_eq!(m.match_frame_with(&t, 0, 1.0, &preset).unwrap().len(), 3);
        let constant = FrameTemplate::new("c", vec![slot("person:P")], vec![], vec![Term::Const(2.into())]);
        assert!(m.match_frame(&constant, 0, 1.0).unwrap().is_empty());
    }

    #[test]
    fn constants_must_exist_with_type() {
        let s = sample_store();
        let m = Matcher::cached(&s);
        let t = FrameTemplate::new("k", vec![slot("person:1"), slot("person:P")], vec![rel("near_kb(1,P)")], vec![]);
        let r = m.match_frame(&t, 0, 1.0).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].bindings["P"], EntityId::from(2));
        let wrong = FrameTemplate::new("k", vec![slot("object:1")], vec![], vec![]);
        assert!(m.match_frame(&wrong, 0, 1.0).unwrap().is_empty());
    }

    #[test]
    fn iset_variants_on_sample() {
        let s = sample_store();
        let m = Matcher::cached(&s);
        let t = FrameTemplate::new("n", vec![slot("person:A"), slot("person:B")], vec![rel("near_kb(A,B)")], vec![]);
        assert_eq!(m.iset_match(&t, 1.0).unwrap().to_string(), "[0--1]");
        let groups = m.iset_match_bindings(&t, 1.0).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(t.describe_bindings(&groups[0].bindings), "[person:1, person:2]");
        let empty = FactStore::new();
        assert!(Matcher::cached(&empty).match_all(&t, 1.0).unwrap().is_empty());
    }

    #[test]
    fn stale_threshold_blocks_cached_matching() {
        let s = sample_store();
        let t = FrameTemplate::new("n", vec![slot("person:A"), slot("person:B")], vec![rel("near_kb(A,B)")], vec![]);
        let m = Matcher::new(&s, SpatialConfig::new(10.0).unwrap(), RelationMode::Cached);
        assert!(matches!(m.match_all(&t, 1.0), Err(Error::StaleThreshold { .. })));
        let e = Matcher::new(&s, SpatialConfig::new(10.0).unwrap(), RelationMode::Entail);
        assert!(e.match_all(&t, 1.0).unwrap().is_empty());
    }

    const RELS: [&str; 8] = [
        "near", "not_near", "overlapping", "outside", "higher", "below", "leftOf", "not_moreRight",
    ];

    fn random_store(frames: Vec<Vec<(u8, u8, u8, u8, bool)>>) -> FactStore {
        let mut s = FactStore::new();
        for (f, ents) in frames.into_iter().enumerate() {
            let items: Vec<(u64, EntityType, BoxSpec)> = ents
                .into_iter()
                .enumerate()
                .map(|(i, (x, y, w, h, p))| {
                    let ty = if p { EntityType::Person } else { EntityType::Object };
                    (i as u64, ty, BoxSpec::new(x as f64, y as f64, w as f64 + 1.0, h as f64 + 1.0))
                })
                .collect();
            ingest(&mut s, f as FrameNum, &items);
        }
        s
    }

    fn arb_store() -> impl Strategy<Value = FactStore> {
        let ent = (0u8..120, 0u8..120, 0u8..40, 0u8..40, any::<bool>());
        proptest::collection::vec(proptest::collection::vec(ent, 0..=4), 1..5).prop_map(random_store)
    }

    fn arb_template() -> impl Strategy<Value = FrameTemplate> {
        let slots = proptest::collection::vec(any::<bool>(), 1..=3);
        (slots, proptest::collection::vec((0usize..8, 0usize..3, 0usize..3), 0..4)).prop_map(|(types, rels)| {
            let type_list: Vec<TypeSlot> = types
                .iter()
                .enumerate()
                .map(|(i, p)| TypeSlot::new(if *p { EntityType::Person } else { EntityType::Object }, Term::Var(format!("V{i}"))))
                .collect();
            let n = type_list.len();
            let relations = rels
                .into_iter()
                .filter(|(_, a, b)| a % n != b % n)
                .map(|(r, a, b)| RelationAtom::new(RELS[r].parse().unwrap(), Term::Var(format!("V{}", a % n)), Term::Var(format!("V{}", b % n))))
                .collect();
            FrameTemplate::new("p", type_list, relations, vec![])
        })
    }

    /// Every injective typed assignment, scored directly from geometry.
    fn brute_force(s: &FactStore, t: &FrameTemplate, frame: FrameNum, threshold: f64) -> Vec<MatchResult> {
        let present = s.entities_present(frame);
        let cfg = SpatialConfig::default();
        let mut out = Vec::new();
        let n = t.type_list.len();
        let mut idx = vec![0usize; n];
        if present.is_empty() {
            return out;
        }
        loop {
            let chosen: Vec<&EntityId> = idx.iter().map(|i| &present[*i]).collect();
            let distinct = (0..n).all(|i| (0..i).all(|j| chosen[i] != chosen[j]));
            let typed = (0..n).all(|i| s.entity_state(chosen[i], frame).unwrap().entity_type == t.type_list[i].entity_type);
            if distinct && typed {
                let b: Bindings = (0..n).map(|i| (format!("V{i}"), chosen[i].clone())).collect();
                let ok = t
                    .relations
                    .iter()
                    .filter(|r| {
                        let x = s.entity_state(&b[r.a.as_var().unwrap()], frame).unwrap().bounds;
                        let y = s.entity_state(&b[r.b.as_var().unwrap()], frame).unwrap().bounds;
                        spatial::holds(r.relation.relation, &x, &y, &cfg) != r.relation.negated
                    })
                    .count();
                let score = if t.relations.is_empty() { 1.0 } else { ok as f64 / t.relations.len() as f64 };
                if score + SCORE_EPS >= threshold {
                    out.push(MatchResult { frame, bindings: b, score });
                }
            }
            let mut k = n;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < present.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    proptest! {
        #[test]
        fn matching_agrees_with_brute_force(s in arb_store(), t in arb_template(), th in 0usize..=4) {
            let threshold = th as f64 / 4.0;
            let cached = Matcher::cached(&s);
            let entail = Matcher::new(&s, SpatialConfig::default(), RelationMode::Entail);
            for f in s.processed_frames() {
                let a = cached.match_frame(&t, f, threshold).unwrap();
                let b = entail.match_frame(&t, f, threshold).unwrap();
                prop_assert_eq!(&a, &b);
                prop_assert_eq!(&a, &brute_force(&s, &t, f, threshold));
                for m in &a {
                    prop_assert!((0.0..=1.0).contains(&m.score));
                }
            }
        }

        #[test]
        fn raising_threshold_never_adds_matches(s in arb_store(), t in arb_template()) {
            let m = Matcher::cached(&s);
            let mut prev: Option<Vec<MatchResult>> = None;
            for th in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let now = m.match_all(&t, th).unwrap();
                if let Some(p) = &prev {
                    prop_assert!(now.iter().all(|r| p.contains(r)));
                }
                prev = Some(now);
            }
        }

        #[test]
        fn iset_variants_agree(s in arb_store(), t in arb_template()) {
            let m = Matcher::cached(&s);
            let frames: Vec<FrameNum> = m.match_all(&t, 0.5).unwrap().iter().map(|r| r.frame).collect();
            let iset = m.iset_match(&t, 0.5).unwrap();
            prop_assert_eq!(&iset, &make_iset(&frames));
            let groups = m.iset_match_bindings(&t, 0.5).unwrap();
            let union = groups.iter().fold(IntervalSet::new(), |acc, g| acc.union(&g.iset));
            prop_assert_eq!(union, iset);
        }
    }
}
