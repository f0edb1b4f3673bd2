//! Frame lists to interval sets, smoothing, and timestamp lists.

use versa::interval_sets::{iset_tsl, IntervalSet, TimestampList};

fn main() {
    let frames = [1, 2, 3, 5, 6, 9, 14, 15, 16, 20];
    let iset = IntervalSet::from_frames(frames);
    println!("{iset}");
    for r in 0..=2 {
        println!("closed with radius {r}: {}", iset.close(r));
    }

    let tsl = TimestampList::parse("[b-27, a-14, a-13, b-28, a-15, a-20]").unwrap();
    println!("{}", tsl.sort_group());
    println!("{}", iset_tsl(&tsl));
}
