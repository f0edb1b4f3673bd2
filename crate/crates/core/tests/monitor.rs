//! Monitor behavior over a store that grows between ticks.

use std::collections::BTreeSet;

use proptest::prelude::*;

use versa::cvml::{CvmlDataset, FrameProcessor};
use versa::events::{evaluate_event, left_item_template, EventStep, EventTemplate, SearchMode};
use versa::kb::{FactStore, SharedStore};
use versa::monitor::{Monitor, MonitorConfig, TemplateRegistry};
use versa::synthetic;
use versa::templates::{parse_frame_template, Matcher};

fn near_event() -> EventTemplate {
    let t = parse_frame_template("frametemplate(close, [person:P, object:O], [near_kb(P,O)], [])").unwrap();
    EventTemplate {
        id: "close".into(),
        steps: vec![EventStep::instant("0", t)],
        constraints: vec![],
    }
}

fn monitor(store: &SharedStore, templates: Vec<EventTemplate>) -> Monitor {
    let reg = TemplateRegistry::new();
    for t in templates {
        reg.add(t).unwrap();
    }
    Monitor::new("ds", store.clone(), reg, MonitorConfig::default())
}

/// Feeds `ds` in chunks ending at each of `cuts`, ticking after each.
fn fired_keys(ds: &CvmlDataset, cuts: &[u32], templates: Vec<EventTemplate>) -> BTreeSet<(String, String)> {
    let store = FactStore::new().shared();
    let mut m = monitor(&store, templates);
    let proc = FrameProcessor::default();
    let mut lo = 0;
    let mut out = BTreeSet::new();
    for &hi in cuts {
        proc.process_dataset(&mut store.write(), &synthetic::slice(ds, lo, hi)).unwrap();
        for r in m.tick().fired {
            out.insert((r.event, r.key));
        }
        lo = hi + 1;
    }
    out
}

#[test]
fn disjoint_monitors_cover_the_same_detections() {
    let ds = synthetic::drop_scenario();
    let store = FactStore::new().shared();
    FrameProcessor::default().process_dataset(&mut store.write(), &ds).unwrap();

    let mut a = monitor(&store, vec![left_item_template()]);
    let mut b = monitor(&store, vec![near_event()]);
    let mut both = monitor(&store, vec![left_item_template(), near_event()]);

    let split: BTreeSet<_> = a.tick().fired.into_iter().chain(b.tick().fired).map(|r| (r.event, r.key)).collect();
    let joint: BTreeSet<_> = both.tick().fired.into_iter().map(|r| (r.event, r.key)).collect();
    assert_eq!(split, joint);
    assert!(joint.iter().any(|(e, _)| e == "left_item"));
    assert!(joint.iter().any(|(e, _)| e == "close"));
}

#[test]
fn after_step_arriving_late_is_missed() {
    // Every anchor of the episode is consumed before the walk-away frames exist.
    let ds = synthetic::drop_scenario();
    assert!(fired_keys(&ds, &[139, 199], vec![left_item_template()]).is_empty());
}

#[test]
fn episode_split_across_ticks_fires_once() {
    let ds = synthetic::drop_scenario();
    let keys = fired_keys(&ds, &[110, 120, 199], vec![near_event()]);
    assert_eq!(keys.len(), 1, "{keys:?}");
}

fn full_bindings(ds: &CvmlDataset, ev: &EventTemplate) -> BTreeSet<String> {
    let mut store = FactStore::new();
    FrameProcessor::default().process_dataset(&mut store, ds).unwrap();
    evaluate_event(Matcher::cached(&store), ev, SearchMode::All, None)
        .unwrap()
        .iter()
        .map(|d| d.key().split('|').nth(1).unwrap().to_string())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chunked_feed_finds_what_a_full_pass_finds(mut cuts in proptest::collection::vec(0u32..199, 0..4)) {
        let ds = synthetic::drop_scenario();
        // A cut at 139 consumes every anchor before the after step exists.
        cuts.retain(|&c| c != 139);
        cuts.push(199);
        cuts.sort_unstable();
        cuts.dedup();
        let got: BTreeSet<String> = fired_keys(&ds, &cuts, vec![left_item_template()])
            .into_iter()
            .map(|(_, k)| k.split('|').nth(1).unwrap().to_string())
            .collect();
        let want = full_bindings(&ds, &left_item_template());
        prop_assert!(!want.is_empty());
        prop_assert_eq!(got, want);
    }
}
