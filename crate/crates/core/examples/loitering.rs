//! Loitering near a static area, with short gaps smoothed over.

use versa::events::loitering_in;
use versa::synthetic;
use versa::templates::Matcher;

fn main() -> versa::Result<()> {
    let (area_id, area) = synthetic::storefront();
    let mut store = synthetic::load(&synthetic::loitering_scenario())?;
    store.assert_static_entity(area_id.clone(), area, 0.0)?;

    for d in [50, 500, 700] {
        let hits = loitering_in(Matcher::cached(&store), &area_id, d, 1)?;
        println!("duration {d}: {} hit(s)", hits.len());
        for h in hits {
            println!("  {h}");
        }
    }
    // Without smoothing the two missing frames split the stay.
    let raw = loitering_in(Matcher::cached(&store), &area_id, 50, 0)?;
    println!("radius 0: {:?}", raw.iter().map(|h| (h.start, h.end)).collect::<Vec<_>>());
    Ok(())
}
