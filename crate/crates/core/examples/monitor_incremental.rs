//! A monitor over a store that receives frames in two batches. The second
//! tick only looks at anchors past the previous high-water mark.

use versa::cvml::FrameProcessor;
use versa::events::left_item_template;
use versa::kb::FactStore;
use versa::monitor::{Action, Monitor, MonitorConfig, TemplateRegistry};
use versa::synthetic;

fn main() -> versa::Result<()> {
    let ds = synthetic::incremental_scenario();
    let store = FactStore::new().shared();
    let registry = TemplateRegistry::new();
    registry.add(left_item_template())?;
    let config = MonitorConfig::new(100)?.with_action(Action::Console);
    let mut monitor = Monitor::new("incremental", store.clone(), registry.clone(), config);

    let proc = FrameProcessor::default();
    for (lo, hi) in [(0, 1000), (1001, 1030)] {
        proc.process_dataset(&mut store.write(), &synthetic::slice(&ds, lo, hi))?;
        let report = monitor.tick();
        for t in &report.templates {
            println!(
                "tick to {:?}: {} from cursor {:?}, {} anchor frames, {} detection(s)",
                report.high_water, t.template, t.cursor, t.stats.anchor_frames, t.detections
            );
        }
    }
    Ok(())
}
