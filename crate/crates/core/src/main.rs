use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use gazecue::engine::{Engine, Mode};
use gazecue::geometry::{align_frames, rms_residual, Vec3};
use gazecue::protocol::{server, FileLog, Hub, HubConfig};
use gazecue::sim::{replay_file, run_sweep, ReplayError};
use gazecue::CliConfig;

const EXIT_INPUT: u8 = 1;
const EXIT_ENV: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "gazecue",
    version,
    about = "Gaze-guided marker chains: server, sweeps, replay"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the session server (TCP lines and WebSocket /ws).
    Serve(ServeArgs),
    /// Run a simulated Δd × Δt sweep and write the metrics CSV.
    Sweep(SweepArgs),
    /// Re-run a session log and compare every engine emission.
    Replay(ReplayArgs),
    /// Fit a rigid transform to point pairs and report the residual.
    AlignCheck(AlignArgs),
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// JSON config file (sections: engine, agent, experiment, net).
    #[arg(long)]
    config: Option<PathBuf>,
    /// TCP port for newline-delimited JSON clients.
    #[arg(long)]
    port: Option<u16>,
    /// Port of the WebSocket endpoint.
    #[arg(long)]
    ws_port: Option<u16>,
    /// Interface address to listen on.
    #[arg(long)]
    bind: Option<String>,
    /// Directory for session logs.
    #[arg(long)]
    log_dir: Option<PathBuf>,
    /// Default advancement mode: confirmation_gated or scheduled.
    #[arg(long)]
    mode: Option<Mode>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// JSON config file (sections: engine, agent, experiment, net).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed of the simulated agents.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
    /// Episodes per grid cell.
    #[arg(long)]
    episodes: Option<u32>,
    /// Advancement mode: confirmation_gated or scheduled.
    #[arg(long)]
    mode: Option<Mode>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Session log (NDJSON) written by `serve` or a simulation.
    log: PathBuf,
}

#[derive(Debug, Args)]
struct AlignArgs {
    /// JSON file with `[[robot_xyz, world_xyz], ...]` or `{"pairs": [...]}`.
    pairs: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<CliConfig, ExitCode> {
    CliConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_INPUT)
    })
}

fn validated(cfg: CliConfig) -> Result<CliConfig, ExitCode> {
    cfg.validate().map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_INPUT)
    })?;
    Ok(cfg)
}

fn unix_now() -> Duration {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
}

fn cmd_serve(args: ServeArgs) -> Result<(), ExitCode> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(p) = args.port {
        cfg.net.port = p;
    }
    if let Some(p) = args.ws_port {
        cfg.net.ws_port = p;
    }
    if let Some(b) = args.bind {
        cfg.net.bind = b;
    }
    if let Some(d) = args.log_dir {
        cfg.net.log_dir = d;
    }
    if let Some(m) = args.mode {
        cfg.engine.mode = m;
    }
    let cfg = validated(cfg)?;

    let mut engine = Engine::new(cfg.engine.clone()).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_INPUT)
    })?;
    for poi in &cfg.experiment.world {
        engine.add_poi(poi.clone());
    }

    let rt = tokio::runtime::Runtime::new().map_err(|e| {
        eprintln!("error: cannot start runtime: {e}");
        ExitCode::from(EXIT_ENV)
    })?;
    rt.block_on(async move {
        let bound = server::bind(&cfg.net.bind, cfg.net.port, cfg.net.ws_port)
            .await
            .map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_ENV)
            })?;
        let started = unix_now();
        let session_id = format!("s{}", started.as_millis());
        let log_path = cfg.net.log_dir.join(format!("{session_id}.ndjson"));
        let log = FileLog::create(&log_path).map_err(|e| {
            eprintln!("error: cannot open session log {}: {e}", log_path.display());
            ExitCode::from(EXIT_ENV)
        })?;
        let hub = Hub::new(
            engine,
            HubConfig::new(session_id.clone(), started.as_micros() as i64),
            Box::new(log),
        );
        eprintln!(
            "session {session_id}: tcp {} ws {}/ws log {}",
            bound.tcp_addr().map(|a| a.to_string()).unwrap_or_default(),
            bound
                .ws_addr()
                .map(|a| format!("ws://{a}"))
                .unwrap_or_default(),
            log_path.display()
        );
        server::run(
            bound,
            hub,
            Duration::from_millis(cfg.net.tick_ms),
            shutdown_signal(),
        )
        .await
        .map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ENV)
        })?;
        eprintln!("session {session_id} closed");
        Ok(())
    })
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), ExitCode> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.agent.seed = s;
    }
    if let Some(n) = args.episodes {
        cfg.experiment.episodes_per_cell = n;
    }
    if let Some(m) = args.mode {
        cfg.experiment.mode = m;
    }
    let cfg = validated(cfg)?;
    let summary = run_sweep(&cfg.experiment(), &args.out).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            gazecue::sim::SimError::Io { .. } => ExitCode::from(EXIT_ENV),
            _ => ExitCode::from(EXIT_INPUT),
        }
    })?;
    println!("wrote {}", args.out.display());
    println!("episodes: {}", summary.episodes);
    println!("success_rate: {:.3}", summary.success_rate());
    match summary.median_t_i_us {
        Some(m) => println!("median_t_i_us: {m}"),
        None => println!("median_t_i_us: n/a"),
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<(), ExitCode> {
    match replay_file(&args.log) {
        Ok(r) => {
            println!("MATCH ({} events, {} emissions)", r.events, r.emissions);
            Ok(())
        }
        Err(ReplayError::Divergence(d)) => {
            println!("DIVERGENCE at line {}", d.line);
            println!("  logged:   {}", d.expected);
            println!("  replayed: {}", d.actual);
            Err(ExitCode::from(EXIT_DIVERGENCE))
        }
        Err(e @ ReplayError::Malformed { .. }) => {
            println!("DIVERGENCE: {e}");
            Err(ExitCode::from(EXIT_DIVERGENCE))
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(EXIT_INPUT))
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PairsFile {
    Bare(Vec<[Vec3; 2]>),
    Wrapped { pairs: Vec<[Vec3; 2]> },
}

fn cmd_align_check(args: AlignArgs) -> Result<(), ExitCode> {
    let fail = |msg: String| {
        eprintln!("error: {msg}");
        ExitCode::from(EXIT_INPUT)
    };
    let text = std::fs::read_to_string(&args.pairs)
        .map_err(|e| fail(format!("cannot read {}: {e}", args.pairs.display())))?;
    let parsed: PairsFile = serde_json::from_str(&text)
        .map_err(|e| fail(format!("cannot parse {}: {e}", args.pairs.display())))?;
    let pairs: Vec<(Vec3, Vec3)> = match parsed {
        PairsFile::Bare(p) | PairsFile::Wrapped { pairs: p } => {
            p.into_iter().map(|[a, b]| (a, b)).collect()
        }
    };
    let t = align_frames(&pairs).map_err(|e| fail(e.to_string()))?;
    let q = t.quaternion_wxyz();
    let tr = t.translation();
    println!("pairs: {}", pairs.len());
    println!("rotation_wxyz: [{}, {}, {}, {}]", q[0], q[1], q[2], q[3]);
    println!("rotation_deg: {}", t.rotation_angle().to_degrees());
    println!("translation: [{}, {}, {}]", tr.x, tr.y, tr.z);
    println!("rms_residual_m: {:e}", rms_residual(&t, &pairs));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Command::Serve(a) => cmd_serve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Replay(a) => cmd_replay(a),
        Command::AlignCheck(a) => cmd_align_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
