//! Cached relation facts for a frame, and the same questions asked directly.

use versa::cvml::{parse_cvml, FrameProcessor};
use versa::kb::FactStore;
use versa::spatial::{eval_relation, RelationQuery, SpatialConfig};
use versa::EntityId;

fn main() -> versa::Result<()> {
    let mut store = FactStore::new();
    FrameProcessor::default().process_dataset(&mut store, &parse_cvml(versa::LEFT_BAG_SAMPLE)?)?;

    for fact in store.cached_facts(0) {
        println!("{fact}");
    }

    let cfg = SpatialConfig::default();
    let (a, b) = (EntityId::Num(0), EntityId::Num(1));
    for name in ["near", "not_near", "moreRight", "below", "outside"] {
        let q: RelationQuery = name.parse()?;
        let cached = store.cached_holds(q, &a, &b, 0)?;
        let fresh = eval_relation(&store, q, &a, &b, 0, &cfg)?;
        println!("{}: cached={cached} recomputed={fresh}", q.kb_name());
    }
    Ok(())
}
