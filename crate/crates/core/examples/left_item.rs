//! The built-in left item event on a synthetic drop.

use versa::events::{left_item, left_item_template, Evaluator, SearchMode};
use versa::synthetic;
use versa::templates::Matcher;

fn main() -> versa::Result<()> {
    let store = synthetic::load(&synthetic::drop_scenario())?;
    println!("{}", serde_json::to_string_pretty(&left_item_template())?);

    for hit in left_item(Matcher::cached(&store), SearchMode::All)? {
        println!("{hit}");
    }

    let ev = Evaluator::new(Matcher::cached(&store));
    let dets = ev.evaluate(&left_item_template(), SearchMode::First, None)?;
    println!("{:?}", ev.stats());
    for d in &dets {
        println!("{d} verified={}", ev.verify(&left_item_template(), d)?);
    }
    Ok(())
}
