//! The `versa` command line.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use crate::cvml::{complete_frames, parse_file, FrameProcessor, TypeMapping};
use crate::events::{evaluate_event, left_item_template, loitering_in, parse_event_template, EventTemplate, SearchMode};
use crate::geometry::BoxSpec;
use crate::kb::FactStore;
use crate::monitor::{Action, Monitor, MonitorConfig, TemplateRegistry};
use crate::service::{serve, AppState, ServiceConfig};
use crate::spatial::{RelationMode, SpatialConfig};
use crate::synthetic;
use crate::templates::{parse_frame_template, Matcher};
use crate::{EntityId, FrameNum, NEAR_THRESHOLD_ENV};

#[derive(Debug, Parser)]
#[command(name = "versa", version, about = "Event recognition over CVML surveillance annotations")]
pub struct Cli {
    /// Distance below which two entities are `near`.
    #[arg(long, global = true, env = NEAR_THRESHOLD_ENV, value_parser = parse_near)]
    pub near_threshold: Option<f64>,

    /// Role mapping file (`role = person|object` lines).
    #[arg(long, global = true)]
    pub mapping: Option<PathBuf>,

    /// Answer relation queries from the cache or recompute them.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Cached)]
    pub relations: ModeArg,

    /// Static entity, `ID=xc,yc,w,h[,orient]`. Repeatable.
    #[arg(long = "static", global = true, value_name = "ID=BOX")]
    pub statics: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Cached,
    Entail,
}

impl From<ModeArg> for RelationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Cached => RelationMode::Cached,
            ModeArg::Entail => RelationMode::Entail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EventArg {
    LeftItem,
    Loitering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Drop,
    Loitering,
    RandomWalk,
    Incremental,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a CVML file and print a summary.
    Parse {
        input: PathBuf,
        /// Also write the fact store as a snapshot.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Print the cached relation facts of one frame.
    Relations {
        input: PathBuf,
        #[arg(long)]
        frame: FrameNum,
    },
    /// Run a frame template over every frame.
    Match {
        input: PathBuf,
        /// Template file (JSON or `frametemplate(...)` text).
        #[arg(long)]
        template: PathBuf,
        /// Minimum match score, in [0, 1].
        #[arg(long, value_parser = parse_threshold)]
        threshold: Option<f64>,
        /// Print the interval set of matching frames.
        #[arg(long, conflicts_with_all = ["by_binding", "first"])]
        iset: bool,
        /// Print one interval set per binding.
        #[arg(long, conflicts_with = "first")]
        by_binding: bool,
        /// Stop at the first match.
        #[arg(long)]
        first: bool,
    },
    /// Run a built-in or file-based event template.
    Detect {
        input: PathBuf,
        #[arg(long, value_enum, required_unless_present = "template")]
        event: Option<EventArg>,
        /// Event template file (JSON).
        #[arg(long, conflicts_with = "event")]
        template: Option<PathBuf>,
        #[arg(long, default_value = "all")]
        mode: SearchMode,
        /// Only anchors after this frame.
        #[arg(long)]
        cursor: Option<FrameNum>,
        /// Static area id, for loitering.
        #[arg(long)]
        area: Option<String>,
        /// Frames a person must stay, for loitering.
        #[arg(long, default_value_t = 500)]
        duration: FrameNum,
        /// Smoothing radius, for loitering.
        #[arg(long, default_value_t = 1)]
        radius: u32,
    },
    /// Watch a (possibly growing) CVML file and report detections.
    Monitor {
        input: PathBuf,
        /// Event template files. `left_item` is used when none is given.
        #[arg(long = "template")]
        templates: Vec<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        poll_ms: u64,
        /// Append detections to this NDJSON file.
        #[arg(long)]
        log: Option<PathBuf>,
        /// POST each detection to this URL.
        #[arg(long)]
        webhook: Option<String>,
        /// Do not print detections to stdout.
        #[arg(long)]
        quiet: bool,
        /// Stop after this many ticks.
        #[arg(long)]
        ticks: Option<u64>,
    },
    /// Serve the HTTP API and the authoring UI.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// CVML files to load at startup.
        #[arg(long = "load")]
        load: Vec<PathBuf>,
        /// Built UI directory.
        #[arg(long)]
        ui: Option<PathBuf>,
        /// Frame image directory, served under /assets.
        #[arg(long)]
        assets: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        poll_ms: u64,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        webhook: Option<String>,
    },
    /// Write a synthetic CVML corpus.
    Synth {
        #[arg(value_enum)]
        scenario: Scenario,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn parse_near(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    SpatialConfig::new(v).map(|_| v).map_err(|e| e.to_string())
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("threshold must lie in [0, 1], got {v}"))
    }
}

fn parse_static(s: &str) -> anyhow::Result<(EntityId, BoxSpec, f64)> {
    let (id, rest) = s.split_once('=').ok_or_else(|| anyhow!("expected ID=xc,yc,w,h, got `{s}`"))?;
    let nums: Vec<f64> = rest
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad box in `{s}`"))?;
    if nums.len() != 4 && nums.len() != 5 {
        bail!("expected 4 or 5 numbers in `{s}`");
    }
    Ok((
        EntityId::from(id.trim()),
        BoxSpec::new(nums[0], nums[1], nums[2], nums[3]),
        nums.get(4).copied().unwrap_or(0.0),
    ))
}

struct Ctx {
    spatial: SpatialConfig,
    mapping: TypeMapping,
    mode: RelationMode,
    statics: Vec<(EntityId, BoxSpec, f64)>,
}

impl Ctx {
    fn from_cli(cli: &Cli) -> anyhow::Result<Self> {
        let spatial = match cli.near_threshold {
            Some(t) => SpatialConfig::new(t)?,
            None => SpatialConfig::default(),
        };
        let mapping = match &cli.mapping {
            Some(p) => TypeMapping::from_file(p).with_context(|| format!("reading mapping {}", p.display()))?,
            None => TypeMapping::default(),
        };
        let statics = cli.statics.iter().map(|s| parse_static(s)).collect::<anyhow::Result<_>>()?;
        Ok(Self {
            spatial,
            mapping,
            mode: cli.relations.into(),
            statics,
        })
    }

    fn processor(&self) -> FrameProcessor {
        FrameProcessor::new(self.spatial, self.mapping.clone())
    }

    fn new_store(&self) -> anyhow::Result<FactStore> {
        let mut store = FactStore::new();
        for (id, b, o) in &self.statics {
            store.assert_static_entity(id.clone(), *b, *o)?;
        }
        Ok(store)
    }

    /// Loads a CVML document, or a snapshot when the file holds JSON.
    fn load(&self, path: &Path) -> anyhow::Result<FactStore> {
        let head = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        if head.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
            let mut store = FactStore::load_snapshot(head.as_slice())?;
            for (id, b, o) in &self.statics {
                store.assert_static_entity(id.clone(), *b, *o)?;
            }
            return Ok(store);
        }
        let ds = parse_file(path).with_context(|| format!("parsing {}", path.display()))?;
        let mut store = self.new_store()?;
        self.processor().process_dataset(&mut store, &ds)?;
        Ok(store)
    }

    fn matcher<'a>(&self, store: &'a FactStore) -> Matcher<'a> {
        Matcher::new(store, self.spatial, self.mode)
    }
}

fn read_event_template(path: &Path) -> anyhow::Result<EventTemplate> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_event_template(&text)?)
}

/// Runs a parsed command line, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let ctx = Ctx::from_cli(&cli)?;
    match cli.command {
        Command::Parse { input, snapshot } => {
            let store = ctx.load(&input)?;
            writeln!(
                out,
                "{} frames, {} entities, {} basic facts",
                store.processed_frames().count(),
                store.entity_count(),
                store.basic_fact_count()
            )?;
            if let Some(p) = snapshot {
                let f = std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                store.save_snapshot(std::io::BufWriter::new(f))?;
            }
        }
        Command::Relations { input, frame } => {
            let store = ctx.load(&input)?;
            store.ensure_processed(frame)?;
            for f in store.cached_facts(frame) {
                writeln!(out, "{f}")?;
            }
        }
        Command::Match {
            input,
            template,
            threshold,
            iset,
            by_binding,
            first,
        } => {
            let text = std::fs::read_to_string(&template).with_context(|| format!("reading {}", template.display()))?;
            let t = parse_frame_template(&text)?;
            let threshold = threshold.or(t.threshold).unwrap_or(1.0);
            let store = ctx.load(&input)?;
            let m = ctx.matcher(&store);
            if iset {
                writeln!(out, "{}", m.iset_match(&t, threshold)?)?;
            } else if by_binding {
                for bi in m.iset_match_bindings(&t, threshold)? {
                    writeln!(out, "{}-{}", t.describe_bindings(&bi.bindings), bi.iset)?;
                }
            } else if first {
                if let Some(r) = m.first_match(&t, threshold)? {
                    writeln!(out, "{}: {} score {:.3}", r.frame, t.describe_bindings(&r.bindings), r.score)?;
                }
            } else {
                for r in m.match_all(&t, threshold)? {
                    writeln!(out, "{}: {} score {:.3}", r.frame, t.describe_bindings(&r.bindings), r.score)?;
                }
            }
        }
        Command::Detect {
            input,
            event,
            template,
            mode,
            cursor,
            area,
            duration,
            radius,
        } => {
            let store = ctx.load(&input)?;
            let m = ctx.matcher(&store);
            match (event, template) {
                (Some(EventArg::Loitering), _) => {
                    let area = area.ok_or_else(|| anyhow!("--event loitering needs --area"))?;
                    for l in loitering_in(m, &EntityId::from(area.as_str()), duration, radius)? {
                        writeln!(out, "{l}")?;
                    }
                }
                (Some(EventArg::LeftItem), _) => {
                    for d in evaluate_event(m, &left_item_template(), mode, cursor)? {
                        writeln!(out, "{d}")?;
                    }
                }
                (None, Some(path)) => {
                    let ev = read_event_template(&path)?;
                    for d in evaluate_event(m, &ev, mode, cursor)? {
                        writeln!(out, "{d}")?;
                    }
                }
                (None, None) => bail!("give --event or --template"),
            }
        }
        Command::Monitor {
            input,
            templates,
            poll_ms,
            log,
            webhook,
            quiet,
            ticks,
        } => {
            let registry = TemplateRegistry::new();
            if templates.is_empty() {
                registry.add(left_item_template())?;
            }
            for p in &templates {
                registry.add(read_event_template(p)?)?;
            }
            let mut cfg = MonitorConfig::new(poll_ms)?;
            cfg.spatial = ctx.spatial;
            cfg.relation_mode = ctx.mode;
            if !quiet {
                cfg.actions.push(Action::Console);
            }
            if let Some(path) = log {
                cfg.actions.push(Action::Log { path });
            }
            if let Some(url) = webhook {
                cfg.actions.push(Action::Webhook { url });
            }
            let store = ctx.new_store()?.shared();
            let name = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let mut monitor = Monitor::new(&name, store.clone(), registry, cfg);
            let proc = ctx.processor();
            let mut n = 0u64;
            loop {
                let started = Instant::now();
                // Re-read the file; only complete frames above the high-water
                // mark are ingested.
                match std::fs::read_to_string(&input) {
                    Ok(doc) => {
                        let frames = complete_frames(&doc);
                        proc.process_frames(&mut store.write(), frames)?;
                    }
                    Err(e) => log::warn!("reading {}: {e}", input.display()),
                }
                let report = monitor.tick();
                for f in &report.failures {
                    log::warn!("{f}");
                }
                n += 1;
                if ticks.is_some_and(|t| n >= t) {
                    break;
                }
                let period = Duration::from_millis(poll_ms);
                std::thread::sleep(period.saturating_sub(started.elapsed()));
            }
        }
        Command::Serve {
            addr,
            load,
            ui,
            assets,
            poll_ms,
            log,
            webhook,
        } => {
            let mut monitor = MonitorConfig::new(poll_ms)?;
            monitor.spatial = ctx.spatial;
            monitor.relation_mode = ctx.mode;
            if let Some(path) = log {
                monitor.actions.push(Action::Log { path });
            }
            if let Some(url) = webhook {
                monitor.actions.push(Action::Webhook { url });
            }
            let state = AppState::new(ServiceConfig {
                spatial: ctx.spatial,
                mapping: ctx.mapping.clone(),
                monitor,
                assets_dir: assets,
                ui_dir: ui,
            });
            for p in &load {
                let store = ctx.load(p)?;
                let id = state.add_dataset(&p.display().to_string(), store);
                writeln!(out, "loaded {} as {id}", p.display())?;
            }
            let rt = tokio::runtime::Runtime::new()?;
            let stop = Arc::new(AtomicBool::new(false));
            rt.block_on(async {
                let s = stop.clone();
                tokio::spawn(async move {
                    let _ = tokio::signal::ctrl_c().await;
                    s.store(true, std::sync::atomic::Ordering::Relaxed);
                });
                serve(state, addr, stop).await
            })?;
        }
        Command::Synth { scenario, output, seed } => {
            let ds = match scenario {
                Scenario::Drop => synthetic::drop_scenario(),
                Scenario::Loitering => synthetic::loitering_scenario(),
                Scenario::RandomWalk => synthetic::random_walk(seed, 200, 6),
                Scenario::Incremental => synthetic::incremental_scenario(),
            };
            std::fs::write(&output, synthetic::render_cvml(&ds)).with_context(|| format!("writing {}", output.display()))?;
            writeln!(out, "wrote {} frames to {}", ds.frames.len(), output.display())?;
            if scenario == Scenario::Loitering {
                let (id, b) = synthetic::storefront();
                writeln!(
                    out,
                    "static area: --static {id}={},{},{},{}",
                    b.center.x, b.center.y, b.width, b.height
                )?;
            }
        }
    }
    Ok(())
}

/// Entry point for the binary: parses arguments, runs, and maps failures to
/// a one-line diagnostic and a nonzero exit status.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
