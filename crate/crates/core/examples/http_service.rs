//! Start the HTTP service on a free port, upload a clip and run a detection.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde_json::{json, Value};
use versa::service::{serve, AppState, ServiceConfig};
use versa::synthetic;

fn main() -> anyhow::Result<()> {
    let addr: SocketAddr = {
        let l = std::net::TcpListener::bind("127.0.0.1:0")?;
        l.local_addr()?
    };
    let state = AppState::new(ServiceConfig::default());
    let stop = Arc::new(AtomicBool::new(false));
    let server = {
        let (state, stop) = (state.clone(), stop.clone());
        std::thread::spawn(move || {
            tokio::runtime::Runtime::new().unwrap().block_on(serve(state, addr, stop)).unwrap();
        })
    };
    std::thread::sleep(std::time::Duration::from_millis(200));

    let base = format!("http://{addr}");
    let cvml = synthetic::render_cvml(&synthetic::drop_scenario());
    let up: Value = ureq::post(format!("{base}/datasets")).send(cvml.as_str())?.body_mut().read_json()?;
    println!("{up}");
    let id = up["dataset"]["id"].as_str().unwrap();

    let frame: Value = ureq::get(format!("{base}/datasets/{id}/frames/120")).call()?.body_mut().read_json()?;
    println!("{frame}");

    let det: Value = ureq::post(format!("{base}/detect"))
        .send_json(json!({"dataset": id, "event": "left_item"}))?
        .body_mut()
        .read_json()?;
    println!("{}", det["lines"]);

    stop.store(true, Ordering::Relaxed);
    server.join().unwrap();
    Ok(())
}
