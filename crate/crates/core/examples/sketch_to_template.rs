//! Turn a drawn scene into a frame template, then look for it.

use versa::sketch::{sketch_template, Sketch};
use versa::spatial::SpatialConfig;
use versa::synthetic;
use versa::templates::Matcher;

fn main() -> versa::Result<()> {
    let sketch: Sketch = serde_json::from_str(
        r#"{
            "id": "bag_beside_person",
            "entities": [
                {"id": "p", "type": "person", "box": {"xc": 210, "yc": 150, "w": 30, "h": 80}},
                {"id": "bag", "type": "object", "box": {"xc": 200, "yc": 160, "w": 20, "h": 20}}
            ]
        }"#,
    )?;
    let t = sketch_template(&sketch, &SpatialConfig::default())?;
    println!("{t}");

    let store = synthetic::load(&synthetic::drop_scenario())?;
    println!("matches in {}", Matcher::cached(&store).iset_match(&t, 1.0)?);
    Ok(())
}
