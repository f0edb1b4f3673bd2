//! The event monitor: periodic incremental evaluation of registered event
//! templates, with console, log-file and webhook actions.
//!
//! Each registered template carries a cursor. A tick evaluates only anchors
//! after the cursor and then moves the cursor to the store's high-water mark,
//! so frames are never re-examined as anchors once processed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::events::{Detection, EvalStats, EventTemplate, Evaluator, SearchMode, StepMode, StepResult};
use crate::kb::{FactStore, SharedStore};
use crate::spatial::{RelationMode, SpatialConfig};
use crate::templates::{Bindings, Matcher};
use crate::{Error, FrameNum, Result};

/// Version tag written into every [`DetectionRecord`].
pub const RECORD_VERSION: u32 = 1;

/// One detection as persisted and delivered by the monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub version: u32,
    /// Position in the monitor's detection feed, starting at 1.
    pub seq: u64,
    /// Wall-clock time the detection was recorded (RFC 3339).
    pub timestamp: String,
    pub dataset: String,
    pub event: String,
    /// Idempotency key: event id, bindings and anchor frame.
    pub key: String,
    pub bindings: Bindings,
    pub steps: Vec<StepResult>,
    pub anchor_frame: FrameNum,
    pub detected_at: FrameNum,
}

impl DetectionRecord {
    pub fn new(dataset: &str, d: &Detection) -> Self {
        Self {
            version: RECORD_VERSION,
            seq: 0,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            dataset: dataset.to_string(),
            event: d.event.clone(),
            key: d.key(),
            bindings: d.bindings.clone(),
            steps: d.steps.clone(),
            anchor_frame: d.anchor_frame,
            detected_at: d.detected_at,
        }
    }

    /// Single-line JSON form used by the log file and the console.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("detection records always serialize")
    }

    pub fn summary(&self) -> String {
        let mut s = format!("[{}] {} {}:", self.timestamp, self.dataset, self.event);
        for (k, v) in &self.bindings {
            s.push_str(&format!(" {k}={v}"));
        }
        for st in &self.steps {
            if st.time.is_instant() {
                s.push_str(&format!(" {}={}", st.step, st.time.begin));
            } else {
                s.push_str(&format!(" {}={}", st.step, st.time));
            }
        }
        s
    }
}

/// Reads every record from a detection log, skipping malformed lines.
pub fn read_log(path: &Path) -> Result<Vec<DetectionRecord>> {
    let f = File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if let Ok(r) = serde_json::from_str(&line) {
            out.push(r);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Action {
    Console,
    Log { path: PathBuf },
    Webhook { url: String },
}

#[derive(Debug, Clone)]
pub struct MonitorConfig {
    pub poll_period: Duration,
    pub actions: Vec<Action>,
    pub spatial: SpatialConfig,
    pub relation_mode: RelationMode,
}

impl MonitorConfig {
    pub fn new(poll_ms: u64) -> Result<Self> {
        if poll_ms == 0 {
            return Err(Error::InvalidConfig("poll period must be positive".into()));
        }
        Ok(Self {
            poll_period: Duration::from_millis(poll_ms),
            actions: Vec::new(),
            spatial: SpatialConfig::default(),
            relation_mode: RelationMode::Cached,
        })
    }

    pub fn with_action(mut self, a: Action) -> Self {
        self.actions.push(a);
        self
    }
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self::new(1000).unwrap()
    }
}

#[derive(Debug, Clone)]
struct Registered {
    template: EventTemplate,
    cursor: Option<FrameNum>,
}

/// Event templates watched by one monitor, with their cursors. Shared
/// between the monitor thread and whoever adds or removes templates.
#[derive(Debug, Default)]
pub struct TemplateRegistry {
    inner: RwLock<BTreeMap<String, Registered>>,
}

impl TemplateRegistry {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn add(&self, template: EventTemplate) -> Result<()> {
        template.validate()?;
        let mut g = self.inner.write();
        if g.contains_key(&template.id) {
            return Err(Error::DuplicateId(template.id));
        }
        g.insert(template.id.clone(), Registered { template, cursor: None });
        Ok(())
    }

    pub fn remove(&self, id: &str) -> bool {
        self.inner.write().remove(id).is_some()
    }

    pub fn ids(&self) -> Vec<String> {
        self.inner.read().keys().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Option<EventTemplate> {
        self.inner.read().get(id).map(|r| r.template.clone())
    }

    pub fn cursor(&self, id: &str) -> Option<FrameNum> {
        self.inner.read().get(id).and_then(|r| r.cursor)
    }

    pub fn is_empty(&self) -> bool {
        self.inner.read().is_empty()
    }

    fn snapshot(&self) -> Vec<(EventTemplate, Option<FrameNum>)> {
        self.inner.read().values().map(|r| (r.template.clone(), r.cursor)).collect()
    }

    /// Cursors only move forward; a template removed meanwhile stays removed.
    fn advance(&self, id: &str, to: FrameNum) {
        if let Some(r) = self.inner.write().get_mut(id) {
            r.cursor = Some(r.cursor.map_or(to, |c| c.max(to)));
        }
    }
}

/// In-memory list of every detection a monitor has recorded.
#[derive(Debug, Default)]
pub struct DetectionFeed {
    records: RwLock<Vec<DetectionRecord>>,
}

impl DetectionFeed {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn push(&self, mut r: DetectionRecord) -> DetectionRecord {
        let mut g = self.records.write();
        r.seq = g.len() as u64 + 1;
        g.push(r.clone());
        r
    }

    /// Records with a sequence number above `seq`.
    pub fn since(&self, seq: u64) -> Vec<DetectionRecord> {
        self.records.read().iter().filter(|r| r.seq > seq).cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.records.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

trait Sink: Send {
    fn name(&self) -> String;
    fn deliver(&mut self, r: &DetectionRecord) -> std::result::Result<(), String>;
}

struct ConsoleSink;

impl Sink for ConsoleSink {
    fn name(&self) -> String {
        "console".into()
    }
    fn deliver(&mut self, r: &DetectionRecord) -> std::result::Result<(), String> {
        println!("{}", r.summary());
        Ok(())
    }
}

struct LogSink {
    path: PathBuf,
    /// Keys already in the file, loaded lazily.
    keys: Option<HashSet<String>>,
}

impl LogSink {
    fn load_keys(&mut self) -> std::result::Result<&mut HashSet<String>, String> {
        if self.keys.is_none() {
            let keys = if self.path.exists() {
                read_log(&self.path).map_err(|e| e.to_string())?.into_iter().map(|r| r.key).collect()
            } else {
                HashSet::new()
            };
            self.keys = Some(keys);
        }
        Ok(self.keys.as_mut().unwrap())
    }
}

impl Sink for LogSink {
    fn name(&self) -> String {
        format!("log {}", self.path.display())
    }
    fn deliver(&mut self, r: &DetectionRecord) -> std::result::Result<(), String> {
        if self.load_keys()?.contains(&r.key) {
            return Ok(());
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| e.to_string())?;
        writeln!(f, "{}", r.to_line()).map_err(|e| e.to_string())?;
        f.flush().map_err(|e| e.to_string())?;
        self.load_keys()?.insert(r.key.clone());
        Ok(())
    }
}

struct WebhookSink {
    url: String,
    agent: ureq::Agent,
}

impl Sink for WebhookSink {
    fn name(&self) -> String {
        format!("webhook {}", self.url)
    }
    fn deliver(&mut self, r: &DetectionRecord) -> std::result::Result<(), String> {
        self.agent
            .post(&self.url)
            .header("Idempotency-Key", &r.key)
            .send_json(r)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

fn make_sink(a: &Action) -> Box<dyn Sink> {
    match a {
        Action::Console => Box::new(ConsoleSink),
        Action::Log { path } => Box::new(LogSink {
            path: path.clone(),
            keys: None,
        }),
        Action::Webhook { url } => {
            let agent: ureq::Agent = ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(5)))
                .build()
                .into();
            Box::new(WebhookSink { url: url.clone(), agent })
        }
    }
}

/// What one template did during a tick.
#[derive(Debug, Clone)]
pub struct TemplateTick {
    pub template: String,
    /// Cursor at the start of the tick.
    pub cursor: Option<FrameNum>,
    pub stats: EvalStats,
    pub detections: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TickReport {
    pub high_water: Option<FrameNum>,
    pub templates: Vec<TemplateTick>,
    /// Records first recorded during this tick.
    pub fired: Vec<DetectionRecord>,
    /// Evaluation and delivery failures; none of them stop the monitor.
    pub failures: Vec<String>,
}

pub struct Monitor {
    dataset: String,
    store: SharedStore,
    registry: Arc<TemplateRegistry>,
    feed: Arc<DetectionFeed>,
    config: MonitorConfig,
    sinks: Vec<Box<dyn Sink>>,
    /// Records some sinks have not accepted yet, with those sinks' indices.
    pending: Vec<(DetectionRecord, Vec<usize>)>,
    recorded: HashSet<String>,
    /// Last anchor frame reported per event and bindings.
    episodes: HashMap<String, FrameNum>,
}

impl Monitor {
    pub fn new(dataset: &str, store: SharedStore, registry: Arc<TemplateRegistry>, config: MonitorConfig) -> Self {
        let sinks = config.actions.iter().map(make_sink).collect();
        Self {
            dataset: dataset.to_string(),
            store,
            registry,
            feed: DetectionFeed::new(),
            config,
            sinks,
            pending: Vec::new(),
            recorded: HashSet::new(),
            episodes: HashMap::new(),
        }
    }

    /// Uses an existing feed, e.g. one the HTTP service reads from.
    pub fn with_feed(mut self, feed: Arc<DetectionFeed>) -> Self {
        self.feed = feed;
        self
    }

    pub fn registry(&self) -> &Arc<TemplateRegistry> {
        &self.registry
    }

    pub fn feed(&self) -> &Arc<DetectionFeed> {
        &self.feed
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn pending_deliveries(&self) -> usize {
        self.pending.iter().map(|(_, s)| s.len()).sum()
    }

    /// Whether `d` continues an anchor run already reported on an earlier
    /// tick: same bindings, and the anchor step holds on every frame from
    /// the reported anchor up to this one.
    fn continues_episode(&self, store: &FactStore, matcher: Matcher<'_>, ev: &EventTemplate, d: &Detection) -> bool {
        let anchor = &ev.steps[0];
        if anchor.mode != StepMode::Instant {
            return false;
        }
        let ekey = episode_key(d);
        let Some(&prev) = self.episodes.get(&ekey) else {
            return false;
        };
        if prev >= d.anchor_frame {
            return false;
        }
        let vars: HashSet<&str> = anchor.template.variables().collect();
        let preset: Bindings = d
            .bindings
            .iter()
            .filter(|(k, _)| vars.contains(k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        (prev + 1..=d.anchor_frame).all(|f| {
            store.is_processed(f)
                && matcher
                    .match_frame_with(&anchor.template, f, anchor.threshold, &preset)
                    .map(|m| !m.is_empty())
                    .unwrap_or(false)
        })
    }

    /// One poll: retry failed deliveries, evaluate every registered template
    /// from its cursor, record and deliver new detections, advance cursors.
    pub fn tick(&mut self) -> TickReport {
        let mut report = TickReport::default();
        self.retry_pending(&mut report);

        let mut fresh = Vec::new();
        {
            let store = self.store.read();
            report.high_water = store.high_water();
            let Some(hw) = report.high_water else {
                return report;
            };
            let matcher = Matcher::new(&store, self.config.spatial, self.config.relation_mode);
            for (ev, cursor) in self.registry.snapshot() {
                if cursor.is_some_and(|c| c >= hw) {
                    continue;
                }
                let evaluator = Evaluator::new(matcher);
                let found = match evaluator.evaluate(&ev, SearchMode::All, cursor) {
                    Ok(f) => f,
                    Err(e) => {
                        report.failures.push(format!("template {}: {e}", ev.id));
                        continue;
                    }
                };
                let mut count = 0;
                for d in found {
                    let continued = self.continues_episode(&store, matcher, &ev, &d);
                    self.episodes.insert(episode_key(&d), d.anchor_frame);
                    if continued || !self.recorded.insert(d.key()) {
                        continue;
                    }
                    count += 1;
                    fresh.push(DetectionRecord::new(&self.dataset, &d));
                }
                report.templates.push(TemplateTick {
                    template: ev.id.clone(),
                    cursor,
                    stats: evaluator.stats(),
                    detections: count,
                });
                self.registry.advance(&ev.id, hw);
            }
        }

        for r in fresh {
            let r = self.feed.push(r);
            let all: Vec<usize> = (0..self.sinks.len()).collect();
            self.deliver(r.clone(), all, &mut report);
            report.fired.push(r);
        }
        report
    }

    fn deliver(&mut self, r: DetectionRecord, sinks: Vec<usize>, report: &mut TickReport) {
        let mut failed = Vec::new();
        for i in sinks {
            if let Err(e) = self.sinks[i].deliver(&r) {
                report.failures.push(format!("{} for {}: {e}", self.sinks[i].name(), r.key));
                failed.push(i);
            }
        }
        if !failed.is_empty() {
            self.pending.push((r, failed));
        }
    }

    fn retry_pending(&mut self, report: &mut TickReport) {
        for (r, sinks) in std::mem::take(&mut self.pending) {
            self.deliver(r, sinks, report);
        }
    }
}

fn episode_key(d: &Detection) -> String {
    let b: Vec<String> = d.bindings.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{}|{}", d.event, b.join(","))
}

/// Ticks `monitor` every poll period until `stop` is set. Failures are
/// logged and the loop carries on.
pub fn run_monitor(monitor: &mut Monitor, stop: &AtomicBool) {
    while !stop.load(Ordering::Relaxed) {
        let started = Instant::now();
        let report = monitor.tick();
        for f in &report.failures {
            log::warn!("monitor: {f}");
        }
        for r in &report.fired {
            log::info!("monitor: detection {}", r.key);
        }
        while !stop.load(Ordering::Relaxed) && started.elapsed() < monitor.config.poll_period {
            let left = monitor.config.poll_period.saturating_sub(started.elapsed());
            std::thread::sleep(left.min(Duration::from_millis(20)));
        }
    }
}

/// Runs the monitor on its own thread; the handle returns it once stopped.
pub fn spawn_monitor(mut monitor: Monitor, stop: Arc<AtomicBool>) -> JoinHandle<Monitor> {
    std::thread::spawn(move || {
        run_monitor(&mut monitor, &stop);
        monitor
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvml::FrameProcessor;
    use crate::events::left_item_template;
    use crate::synthetic::{drop_scenario, incremental_scenario, slice};
    use std::io::Read;
    use std::net::TcpListener;

    fn feed(store: &SharedStore, ds: &crate::cvml::CvmlDataset) {
        FrameProcessor::default().process_dataset(&mut store.write(), ds).unwrap();
    }

    fn monitor_with(store: &SharedStore, cfg: MonitorConfig) -> Monitor {
        let reg = TemplateRegistry::new();
        reg.add(left_item_template()).unwrap();
        Monitor::new("test", store.clone(), reg, cfg)
    }

    #[test]
    fn zero_poll_period_rejected() {
        assert!(MonitorConfig::new(0).is_err());
    }

    #[test]
    fn incremental_ticks_fire_once() {
        let ds = incremental_scenario();
        let store = FactStore::new().shared();
        let mut m = monitor_with(&store, MonitorConfig::default());
        feed(&store, &slice(&ds, 0, 1000));
        let r1 = m.tick();
        assert!(r1.fired.is_empty());
        assert_eq!(m.registry().cursor("left_item"), Some(1000));
        feed(&store, &slice(&ds, 1001, 1030));
        let r2 = m.tick();
        assert_eq!(r2.fired.len(), 1);
        let stats = &r2.templates[0].stats;
        assert_eq!(stats.lowest_anchor_frame, Some(1001));
        assert_eq!(stats.anchor_frames, 30);
        // Nothing new: no evaluation at all.
        let r3 = m.tick();
        assert!(r3.fired.is_empty() && r3.templates.is_empty());
    }

    #[test]
    fn episode_split_across_ticks_reported_once() {
        let ds = drop_scenario();
        let store = FactStore::new().shared();
        let mut m = monitor_with(&store, MonitorConfig::default());
        feed(&store, &slice(&ds, 0, 150));
        assert_eq!(m.tick().fired.len(), 1);
        feed(&store, &slice(&ds, 151, 199));
        assert!(m.tick().fired.is_empty());
        assert_eq!(m.feed().len(), 1);
    }

    #[test]
    fn removed_template_stops_firing() {
        let ds = incremental_scenario();
        let store = FactStore::new().shared();
        let mut m = monitor_with(&store, MonitorConfig::default());
        feed(&store, &slice(&ds, 0, 1000));
        m.tick();
        assert!(m.registry().remove("left_item"));
        feed(&store, &slice(&ds, 1001, 1030));
        let r = m.tick();
        assert!(r.fired.is_empty() && r.templates.is_empty());
    }

    #[test]
    fn log_is_deduplicated_across_monitors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("detections.ndjson");
        let store = FactStore::new().shared();
        feed(&store, &drop_scenario());
        for _ in 0..2 {
            let cfg = MonitorConfig::default().with_action(Action::Log { path: path.clone() });
            let mut m = monitor_with(&store, cfg);
            m.tick();
            m.tick();
        }
        let recs = read_log(&path).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].version, RECORD_VERSION);
        assert_eq!(recs[0].event, "left_item");
    }

    #[test]
    fn unwritable_log_is_reported_and_retried() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("log.ndjson");
        let store = FactStore::new().shared();
        feed(&store, &drop_scenario());
        let mut m = monitor_with(&store, MonitorConfig::default().with_action(Action::Log { path: path.clone() }));
        let r = m.tick();
        assert_eq!(r.fired.len(), 1);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(m.pending_deliveries(), 1);
        std::fs::create_dir(dir.path().join("missing")).unwrap();
        let r = m.tick();
        assert!(r.failures.is_empty() && r.fired.is_empty());
        assert_eq!(m.pending_deliveries(), 0);
        assert_eq!(read_log(&path).unwrap().len(), 1);
    }

    fn accept_one(listener: &TcpListener) -> String {
        let (mut sock, _) = listener.accept().unwrap();
        sock.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        let mut buf = Vec::new();
        let mut chunk = [0u8; 4096];
        loop {
            let n = sock.read(&mut chunk).unwrap();
            buf.extend_from_slice(&chunk[..n]);
            let text = String::from_utf8_lossy(&buf);
            if let Some(h) = text.find("\r\n\r\n") {
                let len = text[..h]
                    .lines()
                    .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                    .unwrap_or(0);
                if buf.len() >= h + 4 + len {
                    break;
                }
            }
            if n == 0 {
                break;
            }
        }
        sock.write_all(b"HTTP/1.1 200 OK\r\ncontent-length: 0\r\nconnection: close\r\n\r\n").unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn webhook_retried_after_failure() {
        // Reserve a port, then free it so the first delivery is refused.
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let url = format!("http://127.0.0.1:{port}/hook");
        let store = FactStore::new().shared();
        feed(&store, &drop_scenario());
        let mut m = monitor_with(&store, MonitorConfig::default().with_action(Action::Webhook { url }));
        let r = m.tick();
        assert_eq!(r.fired.len(), 1);
        assert_eq!(r.failures.len(), 1);

        let listener = TcpListener::bind(("127.0.0.1", port)).unwrap();
        let server = std::thread::spawn(move || accept_one(&listener));
        let r = m.tick();
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        let request = server.join().unwrap();
        assert!(request.starts_with("POST /hook"));
        assert!(request.to_ascii_lowercase().contains("idempotency-key: left_item|o=2,p=1|100"), "{request}");
        let body = &request[request.find("\r\n\r\n").unwrap() + 4..];
        let rec: DetectionRecord = serde_json::from_str(body).unwrap();
        assert_eq!(rec.anchor_frame, 100);
    }

    #[test]
    fn run_monitor_stops() {
        let store = FactStore::new().shared();
        feed(&store, &drop_scenario());
        let m = monitor_with(&store, MonitorConfig::new(5).unwrap());
        let feed = m.feed().clone();
        let stop = Arc::new(AtomicBool::new(false));
        let h = spawn_monitor(m, stop.clone());
        let t0 = Instant::now();
        while feed.is_empty() && t0.elapsed() < Duration::from_secs(5) {
            std::thread::sleep(Duration::from_millis(5));
        }
        stop.store(true, Ordering::Relaxed);
        let m = h.join().unwrap();
        assert_eq!(m.feed().len(), 1);
    }
}
