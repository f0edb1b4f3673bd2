//! Ingest a CVML document and look at what landed in the fact store.

use versa::cvml::{parse_cvml, FrameProcessor};
use versa::kb::FactStore;

fn main() -> versa::Result<()> {
    let ds = parse_cvml(versa::LEFT_BAG_SAMPLE)?;
    let mut store = FactStore::new();
    let n = FrameProcessor::default().process_dataset(&mut store, &ds)?;
    println!("{n} frames, {} entities, {} basic facts", store.entity_count(), store.basic_fact_count());

    for frame in store.processed_frames() {
        println!("frame {frame}");
        for e in store.entities_in_frame(frame) {
            let s = store.entity_state(&e, frame).unwrap();
            println!("  {e} {:?} box={:?} orient={}", s.entity_type, s.bounds.to_box(), s.orient);
        }
    }
    Ok(())
}
