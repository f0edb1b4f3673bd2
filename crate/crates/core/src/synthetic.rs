//! Scripted and random annotation corpora for tests, examples and demos.
//!
//! Every generator returns a [`CvmlDataset`]; [`render_cvml`] turns one into
//! a document the parser and CLI accept.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cvml::{CvmlDataset, CvmlFrame, CvmlObject, FrameProcessor, Hypothesis};
use crate::geometry::BoxSpec;
use crate::kb::FactStore;
use crate::{EntityId, FrameNum, Result};

pub const PERSON_ROLE: &str = "walker";
pub const OBJECT_ROLE: &str = "object";

pub fn object(id: u64, role: &str, xc: f64, yc: f64, w: f64, h: f64) -> CvmlObject {
    CvmlObject {
        id,
        orientation: 0.0,
        bbox: BoxSpec::new(xc, yc, w, h),
        appearance: Some("visible".into()),
        hypotheses: vec![Hypothesis {
            role: Some(role.into()),
            ..Hypothesis::default()
        }],
    }
}

fn person(id: u64, xc: f64, yc: f64) -> CvmlObject {
    object(id, PERSON_ROLE, xc, yc, 20.0, 40.0)
}

fn bag(id: u64, xc: f64, yc: f64) -> CvmlObject {
    object(id, OBJECT_ROLE, xc, yc, 10.0, 10.0)
}

fn dataset(name: &str, frames: Vec<CvmlFrame>) -> CvmlDataset {
    CvmlDataset {
        name: name.into(),
        frames,
    }
}

/// Person 1 walks alone for frames 0-99, stands next to bag 2 for 100-139
/// and walks away from it for 140-199.
pub fn drop_scenario() -> CvmlDataset {
    let frames = (0..200)
        .map(|f| {
            let mut objects = Vec::new();
            let px = match f {
                0..=99 => 10.0 + 2.0 * f as f64,
                100..=139 => 210.0,
                _ => 260.0 + 2.0 * (f - 140) as f64,
            };
            objects.push(person(1, px, 150.0));
            if f >= 100 {
                objects.push(bag(2, 200.0, 160.0));
            }
            CvmlFrame {
                number: f,
                objects,
                groups: vec![],
            }
        })
        .collect();
    dataset("scripted-drop", frames)
}

/// Id and box of the static area used by [`loitering_scenario`].
pub fn storefront() -> (EntityId, BoxSpec) {
    (EntityId::name("storefront"), BoxSpec::new(255.0, 175.0, 220.0, 40.0))
}

/// Person 1 overlaps the storefront in frames 10-600 except 100 and 300;
/// person 2 passes through it for 50 frames. 701 frames in total.
pub fn loitering_scenario() -> CvmlDataset {
    let frames = (0..=700)
        .map(|f| {
            let inside = (10..=600).contains(&f) && f != 100 && f != 300;
            let mut objects = vec![person(1, if inside { 250.0 } else { 40.0 }, if inside { 170.0 } else { 40.0 })];
            if (200..250).contains(&f) {
                objects.push(person(2, 200.0, 180.0));
            }
            CvmlFrame {
                number: f,
                objects,
                groups: vec![],
            }
        })
        .collect();
    dataset("scripted-loitering", frames)
}

/// Seeded random walk of `entities` boxes over `frames` frames in a
/// 384x288 scene; even ids are people, odd ids objects.
pub fn random_walk(seed: u64, frames: FrameNum, entities: u64) -> CvmlDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state: Vec<(f64, f64, f64, f64)> = (0..entities)
        .map(|_| {
            (
                rng.gen_range(20.0..364.0f64).round(),
                rng.gen_range(20.0..268.0f64).round(),
                rng.gen_range(8.0..40.0f64).round(),
                rng.gen_range(8.0..60.0f64).round(),
            )
        })
        .collect();
    let mut out = Vec::with_capacity(frames as usize);
    for f in 0..frames {
        let mut objects = Vec::new();
        for (i, s) in state.iter_mut().enumerate() {
            s.0 = (s.0 + rng.gen_range(-6.0..=6.0f64).round()).clamp(0.0, 384.0);
            s.1 = (s.1 + rng.gen_range(-6.0..=6.0f64).round()).clamp(0.0, 288.0);
            let role = if i % 2 == 0 { PERSON_ROLE } else { OBJECT_ROLE };
            objects.push(object(i as u64, role, s.0, s.1, s.2, s.3));
        }
        out.push(CvmlFrame {
            number: f,
            objects,
            groups: vec![],
        });
    }
    dataset(&format!("random-walk-{seed}"), out)
}

/// Frames 0-1030. Person 1 walks alone until 1010, bag 2 lies next to them
/// in 1011-1020 and they walk away in 1021-1030. Nothing matches
/// `left_item` before frame 1011.
pub fn incremental_scenario() -> CvmlDataset {
    let frames = (0..=1030)
        .map(|f| {
            let mut objects = Vec::new();
            let px = match f {
                0..=1010 => 20.0 + (f % 200) as f64,
                1011..=1020 => 210.0,
                _ => 270.0 + 3.0 * (f - 1021) as f64,
            };
            objects.push(person(1, px, 150.0));
            if f > 1010 {
                objects.push(bag(2, 200.0, 160.0));
            }
            CvmlFrame {
                number: f,
                objects,
                groups: vec![],
            }
        })
        .collect();
    dataset("scripted-incremental", frames)
}

/// Frames of `ds` numbered in `lo..=hi`.
pub fn slice(ds: &CvmlDataset, lo: FrameNum, hi: FrameNum) -> CvmlDataset {
    CvmlDataset {
        name: ds.name.clone(),
        frames: ds
            .frames
            .iter()
            .filter(|f| (lo..=hi).contains(&f.number))
            .cloned()
            .collect(),
    }
}

/// Ingests a dataset into a fresh store with default settings.
pub fn load(ds: &CvmlDataset) -> Result<FactStore> {
    let mut store = FactStore::new();
    FrameProcessor::default().process_dataset(&mut store, ds)?;
    Ok(store)
}

fn num(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Renders a dataset as a CVML document.
pub fn render_cvml(ds: &CvmlDataset) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(s, "<dataset name=\"{}\">", ds.name);
    for f in &ds.frames {
        let _ = writeln!(s, "  <frame number=\"{}\">", f.number);
        let _ = writeln!(s, "    <objectlist>");
        for o in &f.objects {
            let b = &o.bbox;
            let _ = writeln!(s, "      <object id=\"{}\">", o.id);
            let _ = writeln!(s, "        <orientation>{}</orientation>", num(o.orientation));
            let _ = writeln!(
                s,
                "        <box h=\"{}\" w=\"{}\" xc=\"{}\" yc=\"{}\"/>",
                num(b.height),
                num(b.width),
                num(b.center.x),
                num(b.center.y)
            );
            if let Some(a) = &o.appearance {
                let _ = writeln!(s, "        <appearance>{a}</appearance>");
            }
            let _ = writeln!(s, "        <hypothesislist>");
            for h in &o.hypotheses {
                let _ = writeln!(s, "          <hypothesis evaluation=\"1.0\" id=\"1\" prev=\"1.0\">");
                if let Some(r) = &h.role {
                    let _ = writeln!(s, "            <role evaluation=\"1.0\">{r}</role>");
                }
                let _ = writeln!(s, "          </hypothesis>");
            }
            let _ = writeln!(s, "        </hypothesislist>");
            let _ = writeln!(s, "      </object>");
        }
        let _ = writeln!(s, "    </objectlist>");
        let _ = writeln!(s, "  </frame>");
    }
    let _ = writeln!(s, "</dataset>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvml::parse_cvml;

    #[test]
    fn rendered_documents_parse_back() {
        for ds in [drop_scenario(), random_walk(7, 20, 6)] {
            let back = parse_cvml(&render_cvml(&ds)).unwrap();
            assert_eq!(back.frames.len(), ds.frames.len());
            assert_eq!(back.frames[5].objects, ds.frames[5].objects);
        }
    }

    #[test]
    fn random_walk_is_seeded() {
        assert_eq!(random_walk(3, 30, 6), random_walk(3, 30, 6));
        assert_ne!(random_walk(3, 30, 6), random_walk(4, 30, 6));
    }

    #[test]
    fn drop_scenario_geometry() {
        let ds = drop_scenario();
        let d = |f: usize| {
            let fr = &ds.frames[f];
            crate::geometry::dist(fr.objects[0].bbox.center, fr.objects[1].bbox.center)
        };
        assert!((100..140).all(|f| d(f) < 50.0));
        assert!((140..200).all(|f| d(f) >= 50.0));
        assert!(ds.frames[..100].iter().all(|f| f.objects.len() == 1));
    }
}
