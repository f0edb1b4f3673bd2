//! Match a frame template over a synthetic clip: first match, all matches,
//! partial matches under a lower threshold, and per-binding interval sets.

use versa::synthetic;
use versa::templates::{parse_frame_template, Matcher};

fn main() -> versa::Result<()> {
    let store = synthetic::load(&synthetic::drop_scenario())?;
    let m = Matcher::cached(&store);
    let t = parse_frame_template("frametemplate(beside, [person:P, object:O], [near_kb(P,O), higher_kb(P,O)], [])")?;
    println!("{t}");

    if let Some(r) = m.first_match(&t, 1.0)? {
        println!("first: frame {} {}", r.frame, t.describe_bindings(&r.bindings));
    }
    println!("full matches: {}", m.iset_match(&t, 1.0)?);
    println!("half matches: {}", m.iset_match(&t, 0.5)?);
    for b in m.iset_match_bindings(&t, 1.0)? {
        println!("{} -> {}", t.describe_bindings(&b.bindings), b.iset);
    }
    Ok(())
}
