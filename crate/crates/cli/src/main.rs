//! `pixie`: run bot sessions, replay dialog fixtures, serve a live room
//! and analyze session logs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pixie_core::agent::{AgentConfig, DecisionBackend, FixedRouteBackend, RuleBackend};
use pixie_core::analytics::{summarize, DEFAULT_CELL_SIZE_M};
use pixie_core::harness::{
    interaction_kinds, load_world_source, log_file_name, replay_transcript, run_batch, run_session_in,
    BatchMatrix, BotPersona, Condition, RunStatus, SessionConfig, MANIFEST_FILE,
};
use pixie_core::protocol::WorldHost;
use pixie_driver::{
    addr_from_env, run_agent, serve, DriverClient, ExternalBackend, RunAgentConfig, ServeOptions, TickMode,
};

#[derive(Parser)]
#[command(name = "pixie", version, about = "Navigation agent simulator and analysis tools")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one bot session and write its log.
    Run(RunArgs),
    /// Run a world × condition × seed matrix in parallel.
    Batch(BatchArgs),
    /// Replay a scripted dialog and check its interaction sequence.
    Replay(ReplayArgs),
    /// Compute metrics, heatmaps and a summary from a directory of logs.
    Analyze(AnalyzeArgs),
    /// Bundled batch followed by analysis.
    Demo(DemoArgs),
    /// Serve a live room over WebSocket (plus the HTTP shim).
    Serve(ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Bundled world name or path to a world file.
    #[arg(long, default_value = "museum")]
    world: String,
    #[arg(long, default_value = "A")]
    condition: Condition,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "logs")]
    out: PathBuf,
    /// Session config JSON; flags above override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bot persona JSON.
    #[arg(long)]
    persona: Option<PathBuf>,
    /// Session time cap in seconds.
    #[arg(long)]
    cap: Option<f64>,
}

#[derive(Args)]
struct BatchArgs {
    /// Matrix JSON file; the bundled demo matrix when omitted.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, default_value = "logs")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Fixture file or bundled fixture name.
    #[arg(long, default_value = "tour.dialog.json")]
    fixture: PathBuf,
    /// Repeat the replay and require identical logs.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Write the session log here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, default_value = "logs")]
    logs: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CELL_SIZE_M)]
    cell_size: f64,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    /// Receives `logs/` and `report/`.
    #[arg(long, default_value = "demo")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKind {
    None,
    Rule,
    Route,
    External,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "museum")]
    world: String,
    /// Bind address; defaults to PIXIE_ADDR or 127.0.0.1:7411.
    #[arg(long)]
    addr: Option<String>,
    /// Serve the web client; optionally from DIR.
    #[arg(long, num_args = 0..=1, default_missing_value = default_ui_dir())]
    ui: Option<PathBuf>,
    /// Run an agent in the room.
    #[arg(long, value_enum, default_value = "none", num_args = 0..=1, default_missing_value = "rule")]
    agent: AgentKind,
    #[arg(long, default_value_t = 1.5)]
    think_s: f64,
    /// Endpoint for `--agent external`.
    #[arg(long)]
    external_url: Option<String>,
    #[arg(long)]
    prompt_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn default_ui_dir() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../web/www")
}

type CmdResult = Result<(), String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Batch(a) => cmd_batch(a),
        Cmd::Replay(a) => cmd_replay(a),
        Cmd::Analyze(a) => cmd_analyze(a),
        Cmd::Demo(a) => cmd_demo(a),
        Cmd::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("pixie: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_run(a: RunArgs) -> CmdResult {
    let mut cfg: SessionConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SessionConfig::default(),
    };
    cfg.world = a.world;
    cfg.condition = a.condition;
    cfg.seed = a.seed;
    if let Some(p) = &a.persona {
        cfg.persona = read_json::<BotPersona>(p)?;
    }
    if let Some(cap) = a.cap {
        cfg.duration_cap_s = cap;
    }
    let log = run_session_in(&cfg, Some(Path::new("."))).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&a.out).map_err(|e| format!("{}: {e}", a.out.display()))?;
    let stem = Path::new(&cfg.world).file_name().map_or(cfg.world.clone(), |s| s.to_string_lossy().into_owned());
    let stem = stem.trim_end_matches(".world.json");
    let path = a.out.join(log_file_name(stem, cfg.condition, cfg.seed));
    std::fs::write(&path, log.to_jsonl()).map_err(|e| format!("{}: {e}", path.display()))?;
    println!(
        "{}: dwell {:.1} s, {} navigation requests, {} chat lines",
        path.display(),
        log.exit_t_s - log.entry_t_s,
        log.nav_requests.len(),
        log.chat.len()
    );
    Ok(())
}

fn cmd_batch(a: BatchArgs) -> CmdResult {
    let (mut matrix, base) = match &a.matrix {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            (BatchMatrix::parse(&text).map_err(|e| e.to_string())?, p.parent().map(Path::to_path_buf))
        }
        None => (BatchMatrix::demo(), None),
    };
    if let Some(w) = a.workers {
        matrix.workers = w;
    }
    let started = Instant::now();
    let manifest = run_batch(&matrix, base.as_deref(), &a.out).map_err(|e| e.to_string())?;
    for run in manifest.runs.iter().filter(|r| r.status == RunStatus::Failed) {
        eprintln!(
            "failed: {} {} seed {}: {}",
            run.world,
            run.condition,
            run.seed,
            run.error.as_deref().unwrap_or("?")
        );
    }
    println!(
        "{} of {} sessions ok in {:.1} s; manifest at {}",
        manifest.ok_count(),
        manifest.runs.len(),
        started.elapsed().as_secs_f64(),
        a.out.join(MANIFEST_FILE).display()
    );
    if manifest.ok_count() == 0 {
        return Err("every session failed".into());
    }
    Ok(())
}

fn cmd_replay(a: ReplayArgs) -> CmdResult {
    let started = Instant::now();
    let mut first: Option<String> = None;
    for run in 1..=a.runs.max(1) {
        let log = replay_transcript(&a.fixture).map_err(|e| e.to_string())?;
        let text = log.to_jsonl();
        match &first {
            None => {
                println!("{}", interaction_kinds(&log).join(" "));
                println!("exit at {:.1} s", log.exit_t_s);
                if let Some(out) = &a.out {
                    std::fs::write(out, &text).map_err(|e| format!("{}: {e}", out.display()))?;
                }
                first = Some(text);
            }
            Some(f) if *f != text => return Err(format!("run {run} differs from run 1")),
            Some(_) => {}
        }
    }
    println!(
        "replay ok: {} run(s) identical in {:.2} s",
        a.runs.max(1),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn analyze(logs: &Path, cell: f64, out: &Path) -> CmdResult {
    let report = summarize(logs, cell, Some(out)).map_err(|e| e.to_string())?;
    print!("{}", report.summary_text());
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs) -> CmdResult {
    analyze(&a.logs, a.cell_size, &a.out)
}

fn cmd_demo(a: DemoArgs) -> CmdResult {
    let logs = a.out.join("logs");
    cmd_batch(BatchArgs { matrix: None, out: logs.clone(), workers: None })?;
    analyze(&logs, DEFAULT_CELL_SIZE_M, &a.out.join("report"))
}

fn cmd_serve(a: ServeArgs) -> CmdResult {
    let world = load_world_source(&a.world, Some(Path::new("."))).map_err(|e| e.to_string())?;
    let backend: Option<Box<dyn DecisionBackend>> = match a.agent {
        AgentKind::None => None,
        AgentKind::Rule => Some(Box::new(RuleBackend::new(a.think_s))),
        AgentKind::Route => Some(Box::new(FixedRouteBackend::new(world.fixed_route.clone(), a.think_s))),
        AgentKind::External => {
            let url = a.external_url.as_deref().ok_or("--agent external needs --external-url")?;
            let b = match &a.prompt_file {
                Some(p) => ExternalBackend::from_prompt_file(url, p, Duration::from_secs(30)),
                None => ExternalBackend::new(url, "", Duration::from_secs(30)),
            };
            Some(Box::new(b.map_err(|e| e.to_string())?))
        }
    };
    let addr = a.addr.unwrap_or_else(addr_from_env);
    let options = ServeOptions {
        tick: TickMode::Realtime { time_scale: a.time_scale },
        ui_dir: a.ui.clone(),
        ..ServeOptions::default()
    };
    let host = WorldHost::from_world(world, a.seed, 0.1);
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async move {
        let server = serve(host, &addr, options).await.map_err(|e| e.to_string())?;
        println!("serving on ws://{}/ws", server.addr());
        if let Some(dir) = &a.ui {
            println!("web client at http://{}/ from {}", server.addr(), dir.display());
        }
        let agent = match backend {
            Some(b) => {
                let client = DriverClient::connect(&server.addr().to_string()).await.map_err(|e| e.to_string())?;
                let config = RunAgentConfig { agent: AgentConfig::default(), ..RunAgentConfig::default() };
                Some(run_agent(client, b, config))
            }
            None => None,
        };
        let _ = tokio::signal::ctrl_c().await;
        if let Some(agent) = agent {
            agent.stop().await;
        }
        server.shutdown().await;
        Ok(())
    })
}
