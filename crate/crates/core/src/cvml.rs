//! CVML annotation parsing and per-frame ingestion.
//!
//! Documents can be read whole ([`parse_cvml`]) or one `<frame>` element at a
//! time ([`FrameStream`]). Groups, appearance values and all hypotheses after
//! the first are kept in the parsed model but never become facts.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::Serialize;

use crate::geometry::BoxSpec;
use crate::kb::{EntityFrameFacts, FactStore};
use crate::spatial::{entail_frame, SpatialConfig, SpatialRelation, DEFAULT_CACHED};
use crate::{EntityType, Error, FrameNum, Result};

#[derive(Debug, thiserror::Error)]
pub enum CvmlError {
    #[error("malformed XML at byte {position}: {message}")]
    Xml { position: u64, message: String },

    #[error("{context}: missing attribute `{attribute}` on <{element}>")]
    MissingAttribute {
        context: String,
        element: String,
        attribute: String,
    },

    #[error("{context}: missing <{element}>")]
    MissingElement { context: String, element: String },

    #[error("{context}: invalid value `{value}` for {field}")]
    InvalidValue {
        context: String,
        field: String,
        value: String,
    },

    #[error("frame {0} appears more than once")]
    DuplicateFrame(FrameNum),

    #[error("frame {frame}: object {object} appears more than once")]
    DuplicateObject { frame: FrameNum, object: u64 },

    #[error("type mapping line {line}: {message}")]
    Mapping { line: usize, message: String },
}

type CvmlResult<T> = std::result::Result<T, CvmlError>;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Hypothesis {
    pub role: Option<String>,
    pub movement: Option<String>,
    pub context: Option<String>,
    pub situation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvmlObject {
    pub id: u64,
    pub orientation: f64,
    #[serde(rename = "box")]
    pub bbox: BoxSpec,
    pub appearance: Option<String>,
    pub hypotheses: Vec<Hypothesis>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvmlGroup {
    pub id: u64,
    pub orientation: Option<f64>,
    #[serde(rename = "box")]
    pub bbox: Option<BoxSpec>,
    pub members: Vec<u64>,
    pub hypotheses: Vec<Hypothesis>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvmlFrame {
    pub number: FrameNum,
    pub objects: Vec<CvmlObject>,
    pub groups: Vec<CvmlGroup>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CvmlDataset {
    pub name: String,
    pub frames: Vec<CvmlFrame>,
}

impl CvmlDataset {
    pub fn frame_data(&self, n: FrameNum) -> Option<&CvmlFrame> {
        frame_data(self, n)
    }

    /// `(first, last)` frame number present in the document.
    pub fn frame_range(&self) -> Option<(FrameNum, FrameNum)> {
        Some((self.frames.first()?.number, self.frames.last()?.number))
    }
}

/// Exact-number frame lookup. Absent when the document skips `n`.
pub fn frame_data(ds: &CvmlDataset, n: FrameNum) -> Option<&CvmlFrame> {
    ds.frames
        .binary_search_by_key(&n, |f| f.number)
        .ok()
        .map(|i| &ds.frames[i])
}

// ---- generic element tree, built one frame at a time ------------------------------

#[derive(Debug, Default)]
struct Node {
    name: String,
    attrs: Vec<(String, String)>,
    text: String,
    children: Vec<Node>,
}

impl Node {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn child(&self, name: &str) -> Option<&Node> {
        self.children.iter().find(|c| c.name == name)
    }

    fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Node> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    fn text_of(&self, name: &str) -> Option<String> {
        self.child(name).map(|c| c.text.trim().to_string())
    }
}

fn xml_err<R>(reader: &Reader<R>, e: impl std::fmt::Display) -> CvmlError {
    CvmlError::Xml {
        position: reader.buffer_position(),
        message: e.to_string(),
    }
}

fn start_node<R>(reader: &Reader<R>, e: &BytesStart<'_>) -> CvmlResult<Node> {
    let mut node = Node {
        name: String::from_utf8_lossy(e.name().as_ref()).into_owned(),
        ..Node::default()
    };
    for a in e.attributes() {
        let a = a.map_err(|err| xml_err(reader, err))?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        let value = a.unescape_value().map_err(|err| xml_err(reader, err))?.into_owned();
        node.attrs.push((key, value));
    }
    Ok(node)
}

/// Reads `<frame>` elements one at a time from any buffered source.
///
/// The dataset name becomes available once the `<dataset>` start tag has
/// been read.
pub struct FrameStream<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    dataset_name: Option<String>,
    done: bool,
}

impl<R: BufRead> FrameStream<R> {
    pub fn new(source: R) -> Self {
        let mut reader = Reader::from_reader(source);
        reader.config_mut().trim_text(true);
        Self {
            reader,
            buf: Vec::new(),
            dataset_name: None,
            done: false,
        }
    }

    pub fn dataset_name(&self) -> Option<&str> {
        self.dataset_name.as_deref()
    }

    /// Bytes consumed so far.
    pub fn position(&self) -> u64 {
        self.reader.buffer_position()
    }

    fn next_frame(&mut self) -> CvmlResult<Option<CvmlFrame>> {
        let mut stack: Vec<Node> = Vec::new();
        loop {
            self.buf.clear();
            let ev = self
                .reader
                .read_event_into(&mut self.buf)
                .map_err(|e| xml_err(&self.reader, e))?;
            match ev {
                Event::Start(e) => {
                    let node = start_node(&self.reader, &e)?;
                    if stack.is_empty() && node.name == "dataset" {
                        self.dataset_name = Some(node.attr("name").unwrap_or_default().to_string());
                    } else if !stack.is_empty() || node.name == "frame" {
                        stack.push(node);
                    }
                }
                Event::Empty(e) => {
                    let node = start_node(&self.reader, &e)?;
                    match stack.last_mut() {
                        Some(parent) => parent.children.push(node),
                        None if node.name == "frame" => return convert_frame(&node).map(Some),
                        None => {}
                    }
                }
                Event::Text(t) => {
                    if let Some(top) = stack.last_mut() {
                        let text = t.unescape().map_err(|e| xml_err(&self.reader, e))?;
                        top.text.push_str(&text);
                    }
                }
                Event::CData(t) => {
                    if let Some(top) = stack.last_mut() {
                        top.text.push_str(&String::from_utf8_lossy(&t));
                    }
                }
                Event::End(_) => {
                    if let Some(node) = stack.pop() {
                        match stack.last_mut() {
                            Some(parent) => parent.children.push(node),
                            None => return convert_frame(&node).map(Some),
                        }
                    }
                }
                Event::Eof => {
                    if !stack.is_empty() {
                        return Err(xml_err(&self.reader, "unexpected end of document inside <frame>"));
                    }
                    return Ok(None);
                }
                _ => {}
            }
        }
    }
}

impl<R: BufRead> Iterator for FrameStream<R> {
    type Item = CvmlResult<CvmlFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_frame() {
            Ok(Some(f)) => Some(Ok(f)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn parse_num<T: std::str::FromStr>(context: &str, field: &str, value: &str) -> CvmlResult<T> {
    value.trim().parse().map_err(|_| CvmlError::InvalidValue {
        context: context.to_string(),
        field: field.to_string(),
        value: value.to_string(),
    })
}

fn required_attr<'a>(node: &'a Node, attr: &str, context: &str) -> CvmlResult<&'a str> {
    node.attr(attr).ok_or_else(|| CvmlError::MissingAttribute {
        context: context.to_string(),
        element: node.name.clone(),
        attribute: attr.to_string(),
    })
}

fn parse_box(node: &Node, context: &str) -> CvmlResult<BoxSpec> {
    let mut vals = [0.0f64; 4];
    for (slot, key) in vals.iter_mut().zip(["h", "w", "xc", "yc"]) {
        let raw = required_attr(node, key, context)?;
        let v: f64 = parse_num(context, &format!("box {key}"), raw)?;
        if !v.is_finite() || v < 0.0 {
            return Err(CvmlError::InvalidValue {
                context: context.to_string(),
                field: format!("box {key}"),
                value: raw.to_string(),
            });
        }
        *slot = v;
    }
    let [h, w, xc, yc] = vals;
    Ok(BoxSpec::new(xc, yc, w, h))
}

fn parse_hypotheses(node: &Node) -> Vec<Hypothesis> {
    node.child("hypothesislist")
        .map(|list| {
            list.children_named("hypothesis")
                .map(|h| Hypothesis {
                    role: h.text_of("role"),
                    movement: h.text_of("movement"),
                    context: h.text_of("context"),
                    situation: h.text_of("situation"),
                })
                .collect()
        })
        .unwrap_or_default()
}

fn convert_frame(node: &Node) -> CvmlResult<CvmlFrame> {
    let number: FrameNum = parse_num("frame", "frame number", required_attr(node, "number", "frame")?)?;
    let fctx = format!("frame {number}");
    let mut objects = Vec::new();
    let mut seen = BTreeSet::new();
    if let Some(list) = node.child("objectlist") {
        for o in list.children_named("object") {
            let id: u64 = parse_num(&fctx, "object id", required_attr(o, "id", &fctx)?)?;
            let ctx = format!("frame {number}, object {id}");
            if !seen.insert(id) {
                return Err(CvmlError::DuplicateObject { frame: number, object: id });
            }
            let bbox = o.child("box").ok_or_else(|| CvmlError::MissingElement {
                context: ctx.clone(),
                element: "box".into(),
            })?;
            let orientation = match o.text_of("orientation") {
                Some(t) if !t.is_empty() => parse_num(&ctx, "orientation", &t)?,
                _ => 0.0,
            };
            objects.push(CvmlObject {
                id,
                orientation,
                bbox: parse_box(bbox, &ctx)?,
                appearance: o.text_of("appearance"),
                hypotheses: parse_hypotheses(o),
            });
        }
    }
    let mut groups = Vec::new();
    if let Some(list) = node.child("grouplist") {
        for g in list.children_named("group") {
            let id: u64 = parse_num(&fctx, "group id", required_attr(g, "id", &fctx)?)?;
            let ctx = format!("frame {number}, group {id}");
            let members = g
                .text_of("members")
                .unwrap_or_default()
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| parse_num(&ctx, "members", s))
                .collect::<CvmlResult<Vec<u64>>>()?;
            groups.push(CvmlGroup {
                id,
                orientation: match g.text_of("orientation") {
                    Some(t) if !t.is_empty() => Some(parse_num(&ctx, "orientation", &t)?),
                    _ => None,
                },
                bbox: g.child("box").map(|b| parse_box(b, &ctx)).transpose()?,
                members,
                hypotheses: parse_hypotheses(g),
            });
        }
    }
    Ok(CvmlFrame {
        number,
        objects,
        groups,
    })
}

/// Parses a whole CVML document. Frames come back ascending by number.
pub fn parse_cvml(document: &str) -> CvmlResult<CvmlDataset> {
    parse_reader(document.as_bytes())
}

pub fn parse_reader<R: BufRead>(source: R) -> CvmlResult<CvmlDataset> {
    let mut stream = FrameStream::new(source);
    let mut frames = Vec::new();
    for f in stream.by_ref() {
        frames.push(f?);
    }
    frames.sort_by_key(|f| f.number);
    if let Some(w) = frames.windows(2).find(|w| w[0].number == w[1].number) {
        return Err(CvmlError::DuplicateFrame(w[0].number));
    }
    Ok(CvmlDataset {
        name: stream.dataset_name().unwrap_or_default().to_string(),
        frames,
    })
}

pub fn parse_file(path: &Path) -> Result<CvmlDataset> {
    let f = std::fs::File::open(path)?;
    Ok(parse_reader(std::io::BufReader::new(f))?)
}

/// Reads every complete `<frame>` element from a document that may still be
/// growing. A truncated trailing element is ignored.
pub fn complete_frames(document: &str) -> Vec<CvmlFrame> {
    let mut out = Vec::new();
    for f in FrameStream::new(document.as_bytes()) {
        match f {
            Ok(f) => out.push(f),
            Err(_) => break,
        }
    }
    out
}

// ---- role to type mapping ---------------------------------------------------------

/// Maps the first hypothesis's role to an entity type.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeMapping {
    pub roles: HashMap<String, EntityType>,
    pub default: EntityType,
}

impl Default for TypeMapping {
    fn default() -> Self {
        let roles = ["walker", "browser", "fighter"]
            .into_iter()
            .map(|r| (r.to_string(), EntityType::Person))
            .collect();
        Self {
            roles,
            default: EntityType::Object,
        }
    }
}

impl TypeMapping {
    /// Reads `role = person|object` lines on top of the default table.
    /// `default = ...` sets the fallback; `#` starts a comment.
    pub fn parse(text: &str) -> CvmlResult<Self> {
        let mut m = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CvmlError::Mapping {
                line: i + 1,
                message: format!("expected `role = type`, got `{line}`"),
            })?;
            let ty = match v.trim() {
                "person" => EntityType::Person,
                "object" => EntityType::Object,
                other => {
                    return Err(CvmlError::Mapping {
                        line: i + 1,
                        message: format!("type must be person or object, got `{other}`"),
                    })
                }
            };
            match k.trim() {
                "default" => m.default = ty,
                role => {
                    m.roles.insert(role.to_string(), ty);
                }
            }
        }
        Ok(m)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?)?)
    }

    pub fn entity_type(&self, obj: &CvmlObject) -> EntityType {
        entity_type(obj, self)
    }
}

pub fn entity_type(obj: &CvmlObject, mapping: &TypeMapping) -> EntityType {
    obj.hypotheses
        .first()
        .and_then(|h| h.role.as_deref())
        .and_then(|r| mapping.roles.get(r.trim()))
        .copied()
        .unwrap_or(mapping.default)
}

// ---- ingestion --------------------------------------------------------------------

/// Ingestion settings: which relations to cache, the `near` threshold, and
/// the role mapping.
#[derive(Debug, Clone)]
pub struct FrameProcessor {
    pub spatial: SpatialConfig,
    pub functors: Vec<SpatialRelation>,
    pub mapping: TypeMapping,
}

impl Default for FrameProcessor {
    fn default() -> Self {
        Self {
            spatial: SpatialConfig::default(),
            functors: DEFAULT_CACHED.to_vec(),
            mapping: TypeMapping::default(),
        }
    }
}

impl FrameProcessor {
    pub fn new(spatial: SpatialConfig, mapping: TypeMapping) -> Self {
        Self {
            spatial,
            mapping,
            ..Self::default()
        }
    }

    /// Asserts the basic facts of one frame, entails and caches its
    /// relations, then moves the high-water mark to `n`. `None` is an empty
    /// frame.
    pub fn process_frame(&self, store: &mut FactStore, n: FrameNum, frame: Option<&CvmlFrame>) -> Result<()> {
        if store.high_water().is_some_and(|hw| n <= hw) {
            return Err(Error::AlreadyProcessed(n));
        }
        let facts: Vec<EntityFrameFacts> = frame
            .map(|f| {
                f.objects
                    .iter()
                    .map(|o| {
                        EntityFrameFacts::from_box(o.id.into(), n, self.mapping.entity_type(o), o.bbox, o.orientation)
                    })
                    .collect()
            })
            .unwrap_or_default();
        for f in &facts {
            if store.static_entity(&f.entity).is_some() {
                return Err(Error::StaticCollision(f.entity.clone()));
            }
        }
        for f in facts {
            store.assert_entity_facts(f)?;
        }
        entail_frame(store, n, &self.functors, &self.spatial)?;
        store.set_high_water(n)
    }

    /// Processes every frame after the store's high-water mark up to the
    /// last frame of the document, filling skipped numbers with empty frames.
    pub fn process_dataset(&self, store: &mut FactStore, ds: &CvmlDataset) -> Result<usize> {
        let Some((first, last)) = ds.frame_range() else {
            return Ok(0);
        };
        let start = match store.high_water() {
            Some(hw) => hw.saturating_add(1).max(first),
            None => first,
        };
        let mut count = 0;
        for n in start..=last {
            self.process_frame(store, n, ds.frame_data(n))?;
            count += 1;
        }
        Ok(count)
    }

    /// Like [`process_dataset`](Self::process_dataset) for a frame sequence
    /// that arrives in ascending order, e.g. from a [`FrameStream`].
    pub fn process_frames<I: IntoIterator<Item = CvmlFrame>>(&self, store: &mut FactStore, frames: I) -> Result<usize> {
        let mut count = 0;
        for f in frames {
            if store.high_water().is_some_and(|hw| f.number <= hw) {
                continue;
            }
            if let Some(hw) = store.high_water() {
                for gap in hw + 1..f.number {
                    self.process_frame(store, gap, None)?;
                }
            }
            self.process_frame(store, f.number, Some(&f))?;
            count += 1;
        }
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::kb::{BasicKind, BasicValue};
    use crate::spatial::RelationQuery;
    use crate::EntityId;

    fn sample() -> CvmlDataset {
        parse_cvml(crate::LEFT_BAG_SAMPLE).unwrap()
    }

    #[test]
    fn parses_sample_document() {
        let ds = sample();
        assert_eq!(ds.name, "LeftBag");
        assert_eq!(ds.frames.len(), 2);
        let o = &ds.frames[0].objects[0];
        assert_eq!((o.id, o.orientation), (0, 165.0));
        assert_eq!(o.bbox, BoxSpec::new(184.0, 204.0, 55.0, 30.0));
        assert_eq!(o.appearance.as_deref(), Some("appear"));
        assert_eq!(o.hypotheses[0].role.as_deref(), Some("walker"));
        assert_eq!(ds.frames[0].groups[0].members, [1, 2]);
        assert!(ds.frames.iter().all(|f| f.objects.len() == 3));
    }

    #[test]
    fn frame_lookup() {
        let ds = sample();
        assert_eq!(frame_data(&ds, 1).unwrap().objects[0].bbox.center, Point::new(183.0, 200.0));
        assert!(frame_data(&ds, 7).is_none());
        assert!(frame_data(&CvmlDataset::default(), 0).is_none());
    }

    #[test]
    fn empty_object_list_is_an_empty_frame() {
        let ds = parse_cvml(r#"<dataset name="x"><frame number="4"><objectlist/></frame></dataset>"#).unwrap();
        assert_eq!(ds.frames[0].number, 4);
        assert!(ds.frames[0].objects.is_empty());
    }

    #[test]
    fn missing_box_names_frame_and_object() {
        let doc = r#"<dataset name="x"><frame number="3"><objectlist><object id="8">
            <orientation>0</orientation></object></objectlist></frame></dataset>"#;
        let msg = parse_cvml(doc).unwrap_err().to_string();
        assert!(msg.contains("frame 3") && msg.contains("object 8") && msg.contains("box"), "{msg}");
    }

    #[test]
    fn bad_attributes_are_rejected() {
        let no_number = r#"<dataset><frame><objectlist/></frame></dataset>"#;
        assert!(matches!(parse_cvml(no_number), Err(CvmlError::MissingAttribute { .. })));
        let bad_box = r#"<dataset><frame number="0"><objectlist><object id="1">
            <box h="x" w="1" xc="1" yc="1"/></object></objectlist></frame></dataset>"#;
        assert!(matches!(parse_cvml(bad_box), Err(CvmlError::InvalidValue { .. })));
        assert!(matches!(parse_cvml("<dataset><frame number=\"0\">"), Err(CvmlError::Xml { .. })));
        let dup = r#"<dataset><frame number="0"/><frame number="0"/></dataset>"#;
        assert!(matches!(parse_cvml(dup), Err(CvmlError::DuplicateFrame(0))));
    }

    #[test]
    fn truncated_stream_yields_complete_frames() {
        let full = crate::LEFT_BAG_SAMPLE;
        let cut = full.find("<frame number=\"1\">").unwrap() + 40;
        let frames = complete_frames(&full[..cut]);
        assert_eq!(frames.len(), 1);
    }

    #[test]
    fn type_mapping() {
        let ds = sample();
        let walker = &ds.frames[0].objects[0];
        assert_eq!(entity_type(walker, &TypeMapping::default()), EntityType::Person);
        let mut bare = walker.clone();
        bare.hypotheses.clear();
        assert_eq!(entity_type(&bare, &TypeMapping::default()), EntityType::Object);
        let m = TypeMapping::parse("# override\nwalker = object\nbag = object\n").unwrap();
        assert_eq!(entity_type(walker, &m), EntityType::Object);
        assert!(TypeMapping::parse("walker: person").is_err());
        assert!(TypeMapping::parse("walker = static").is_err());
    }

    #[test]
    fn processing_sample_asserts_thirty_facts() {
        let ds = sample();
        let mut store = FactStore::new();
        FrameProcessor::default().process_dataset(&mut store, &ds).unwrap();
        assert_eq!(store.basic_fact_count(), 30);
        assert_eq!(store.entity_count(), 3);
        assert_eq!(store.high_water(), Some(1));
        let loc = store.query_basic(BasicKind::Loc, Some(&0.into()), Some(1));
        assert_eq!(loc[0].value, BasicValue::Loc(Point::new(183.0, 200.0)));
        let near = store
            .query_cached(RelationQuery::positive(SpatialRelation::Near), None, None, Some(0))
            .unwrap();
        assert_eq!(near.len(), 2);
        assert!(matches!(
            FrameProcessor::default().process_frame(&mut store, 0, ds.frame_data(0)),
            Err(Error::AlreadyProcessed(0))
        ));
    }

    #[test]
    fn distant_entities_cache_no_near_facts() {
        let doc = r#"<dataset name="x"><frame number="0"><objectlist>
            <object id="1"><box h="10" w="10" xc="0" yc="0"/></object>
            <object id="2"><box h="10" w="10" xc="100" yc="0"/></object>
            <object id="3"><box h="10" w="10" xc="0" yc="100"/></object>
            </objectlist></frame></dataset>"#;
        let mut store = FactStore::new();
        FrameProcessor::default().process_dataset(&mut store, &parse_cvml(doc).unwrap()).unwrap();
        let near = store
            .query_cached(RelationQuery::positive(SpatialRelation::Near), None, None, None)
            .unwrap();
        assert!(near.is_empty());
    }

    #[test]
    fn gaps_become_empty_frames() {
        let doc = r#"<dataset><frame number="0"><objectlist><object id="1"><box h="1" w="1" xc="1" yc="1"/></object></objectlist></frame>
            <frame number="3"><objectlist><object id="1"><box h="1" w="1" xc="2" yc="1"/></object></objectlist></frame></dataset>"#;
        let mut store = FactStore::new();
        let n = FrameProcessor::default().process_dataset(&mut store, &parse_cvml(doc).unwrap()).unwrap();
        assert_eq!(n, 4);
        assert_eq!(store.frame_range(), Some((0, 3)));
        assert!(store.entities_in_frame(2).is_empty());
        assert!(!store.exists(&EntityId::from(1), 1));
    }

    #[test]
    fn incremental_equals_batch() {
        let ds = sample();
        let p = FrameProcessor::default();
        let mut batch = FactStore::new();
        p.process_dataset(&mut batch, &ds).unwrap();
        let mut inc = FactStore::new();
        for f in FrameStream::new(crate::LEFT_BAG_SAMPLE.as_bytes()) {
            p.process_frames(&mut inc, [f.unwrap()]).unwrap();
        }
        let (mut a, mut b) = (Vec::new(), Vec::new());
        batch.save_snapshot(&mut a).unwrap();
        inc.save_snapshot(&mut b).unwrap();
        assert_eq!(a, b);
    }
}
