//! Save a fact store and load it back.

use versa::kb::FactStore;
use versa::synthetic;

fn main() -> versa::Result<()> {
    let store = synthetic::load(&synthetic::drop_scenario())?;
    let mut buf = Vec::new();
    store.save_snapshot(&mut buf)?;
    println!("snapshot: {} bytes", buf.len());

    let back = FactStore::load_snapshot(buf.as_slice())?;
    let mut again = Vec::new();
    back.save_snapshot(&mut again)?;
    println!("frames {:?}, identical bytes: {}", back.frame_range(), buf == again);
    Ok(())
}
