//! Query by example: turning a sketched frame into a frame template.

use serde::{Deserialize, Serialize};

use crate::geometry::BoxSpec;
use crate::kb::{EntityFrameFacts, FactStore};
use crate::spatial::{entail_pairs, RelationQuery, SpatialConfig, SpatialRelation, DEFAULT_CACHED};
use crate::templates::{FrameTemplate, RelationAtom, Term, TypeSlot};
use crate::{EntityId, EntityType, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchBox {
    pub xc: f64,
    pub yc: f64,
    pub w: f64,
    pub h: f64,
}

impl From<SketchBox> for BoxSpec {
    fn from(b: SketchBox) -> Self {
        BoxSpec::new(b.xc, b.yc, b.w, b.h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchEntity {
    pub id: String,
    #[serde(rename = "type")]
    pub entity_type: EntityType,
    #[serde(rename = "box")]
    pub bbox: SketchBox,
    #[serde(default)]
    pub orient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sketch {
    /// Id of the template to produce.
    pub id: String,
    pub entities: Vec<SketchEntity>,
    /// Ids of entities dragged to the not-exists tray.
    #[serde(default)]
    pub not_exists: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

/// Variable name for a sketch id: first letter capitalized, `E` prefixed
/// when the id does not start with a letter.
pub fn variable_for(id: &str) -> String {
    let mut chars = id.trim().chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() => c.to_uppercase().chain(chars).collect(),
        Some('_') => id.trim().to_string(),
        _ => format!("E{}", id.trim()),
    }
}

/// Entails the relations that hold among the sketched entities and returns
/// them as a template over variables. Not-exists entities contribute no
/// relations.
pub fn sketch_to_frame_template(sketch: &Sketch, cfg: &SpatialConfig, functors: &[SpatialRelation]) -> Result<FrameTemplate> {
    let mut vars: Vec<String> = Vec::new();
    for e in &sketch.entities {
        let v = variable_for(&e.id);
        if e.id.trim().is_empty() || vars.contains(&v) {
            return Err(Error::DuplicateId(e.id.clone()));
        }
        if !(e.bbox.w >= 0.0 && e.bbox.h >= 0.0) {
            return Err(Error::InvalidSketch(format!("entity `{}` has a negative size", e.id)));
        }
        vars.push(v);
    }
    let mut absent = Vec::new();
    for id in &sketch.not_exists {
        let v = variable_for(id);
        if vars.contains(&v) {
            return Err(Error::InvalidSketch(format!("`{id}` is both drawn and marked not-exists")));
        }
        if absent.contains(&v) {
            return Err(Error::DuplicateId(id.clone()));
        }
        absent.push(v);
    }

    let mut scratch = FactStore::new();
    for (e, v) in sketch.entities.iter().zip(&vars) {
        let id = EntityId::name(v.as_str());
        let b: BoxSpec = e.bbox.clone().into();
        if e.entity_type == EntityType::Static {
            scratch.assert_static_entity(id, b, e.orient)?;
        } else {
            scratch.assert_entity_facts(EntityFrameFacts::from_box(id, 0, e.entity_type, b, e.orient))?;
        }
    }
    let relations = entail_pairs(&scratch, 0, functors, cfg)
        .into_iter()
        .map(|f| {
            RelationAtom::new(
                RelationQuery::positive(f.relation),
                Term::Var(f.e1.to_string()),
                Term::Var(f.e2.to_string()),
            )
        })
        .collect();
    let mut type_list: Vec<TypeSlot> = sketch
        .entities
        .iter()
        .zip(&vars)
        .map(|(e, v)| TypeSlot::new(e.entity_type, Term::Var(v.clone())))
        .collect();
    type_list.sort_by(|a, b| (a.entity_type, &a.term).cmp(&(b.entity_type, &b.term)));
    let mut t = FrameTemplate::new(&sketch.id, type_list, relations, absent.into_iter().map(Term::Var).collect());
    t.threshold = sketch.threshold;
    t.validate()?;
    Ok(t)
}

/// [`sketch_to_frame_template`] with the default cached relation set.
pub fn sketch_template(sketch: &Sketch, cfg: &SpatialConfig) -> Result<FrameTemplate> {
    sketch_to_frame_template(sketch, cfg, &DEFAULT_CACHED)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::holds;

    fn ent(id: &str, ty: EntityType, xc: f64, yc: f64, w: f64, h: f64) -> SketchEntity {
        SketchEntity {
            id: id.into(),
            entity_type: ty,
            bbox: SketchBox { xc, yc, w, h },
            orient: 0.0,
        }
    }

    fn person_and_bag() -> Sketch {
        Sketch {
            id: "drop".into(),
            entities: vec![
                ent("P0", EntityType::Person, 100.0, 100.0, 20.0, 40.0),
                ent("O1", EntityType::Object, 130.0, 100.0, 10.0, 10.0),
            ],
            not_exists: vec![],
            threshold: None,
        }
    }

    #[test]
    fn person_left_of_nearby_bag() {
        let t = sketch_template(&person_and_bag(), &SpatialConfig::default()).unwrap();
        let rels: Vec<String> = t.relations.iter().map(|r| r.to_string()).collect();
        assert!(rels.contains(&"near_kb(O1,P0)".to_string()), "{rels:?}");
        assert!(rels.contains(&"moreLeft_kb(P0,O1)".to_string()), "{rels:?}");
        assert!(rels.contains(&"leftOf_kb(P0,O1)".to_string()), "{rels:?}");
        assert_eq!(t.to_string().split(", [").nth(1).unwrap(), "object:O1, person:P0]");
    }

    #[test]
    fn relations_match_an_independent_check() {
        let s = person_and_bag();
        let t = sketch_template(&s, &SpatialConfig::default()).unwrap();
        let rect = |i: usize| crate::geometry::rect_from_box(&s.entities[i].bbox.clone().into());
        let mut expected = 0;
        for r in DEFAULT_CACHED {
            for (a, b) in [(0, 1), (1, 0)] {
                if holds(r, &rect(a), &rect(b), &SpatialConfig::default()) {
                    expected += 1;
                }
            }
        }
        assert_eq!(t.relations.len(), expected);
    }

    #[test]
    fn single_entity_has_no_relations() {
        let mut s = person_and_bag();
        s.entities.truncate(1);
        assert!(sketch_template(&s, &SpatialConfig::default()).unwrap().relations.is_empty());
    }

    #[test]
    fn not_exists_tray() {
        let mut s = person_and_bag();
        s.entities.truncate(1);
        s.not_exists = vec!["o1".into()];
        let t = sketch_template(&s, &SpatialConfig::default()).unwrap();
        assert_eq!(t.not_exists, [Term::var("O1")]);
        assert!(t.relations.is_empty());
        let mut bad = person_and_bag();
        bad.not_exists = vec!["O1".into()];
        assert!(matches!(sketch_template(&bad, &SpatialConfig::default()), Err(Error::InvalidSketch(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut s = person_and_bag();
        s.entities[1].id = "p0".into();
        assert!(matches!(sketch_template(&s, &SpatialConfig::default()), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn variable_names() {
        assert_eq!(variable_for("p1"), "P1");
        assert_eq!(variable_for("Bag"), "Bag");
        assert_eq!(variable_for("7"), "E7");
    }
}
