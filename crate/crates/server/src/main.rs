use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use stage_core::capture::parse_bvh;
use stage_server::net::{StopFlag, DEFAULT_DECIMATION};
use stage_server::{parse_script, run, RunOptions, Scene, Stage, DEFAULT_TICK_RATE};

/// Drives a live avatar from motion capture, replays and manipulator commands.
#[derive(Debug, Parser)]
#[command(name = "stage-server", version)]
struct Cli {
    /// Scene file (TOML). A built-in open stage is used without one.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Ticks per second, 10 to 240.
    #[arg(long, default_value_t = DEFAULT_TICK_RATE)]
    tick_rate: f64,
    /// BVH clip to play through a replay input.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Input id the replay drives.
    #[arg(long, default_value = "replay")]
    replay_as: String,
    /// UDP address for device frames.
    #[arg(long)]
    listen_mocap: Option<SocketAddr>,
    /// TCP address for bus peers.
    #[arg(long)]
    listen_bus: Option<SocketAddr>,
    /// TCP address for console WebSocket connections.
    #[arg(long)]
    listen_console: Option<SocketAddr>,
    /// Tick-indexed command file.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Packet log to write.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Stop after this many ticks.
    #[arg(long)]
    ticks: Option<u64>,
    /// Send a frame summary to consoles every this many ticks.
    #[arg(long, default_value_t = DEFAULT_DECIMATION)]
    decimation: u64,
}

fn read(path: &PathBuf) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn start(cli: Cli) -> Result<(), String> {
    let mut scene = match &cli.scene {
        Some(path) => Scene::load(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => Scene::default(),
    };
    let clip = match &cli.replay {
        Some(path) => {
            scene.ensure_replay_input(&cli.replay_as).map_err(|e| e.to_string())?;
            Some(parse_bvh(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?)
        }
        None => None,
    };
    let mut stage = Stage::new(scene, cli.tick_rate).map_err(|e| e.to_string())?;
    if let Some(clip) = clip {
        stage.attach_replay(&cli.replay_as, clip).map_err(|e| e.to_string())?;
    }
    if let Some(path) = &cli.script {
        let entries = parse_script(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
        stage.set_script(entries);
    }
    let offline_ticks = stage.natural_ticks();
    let opts = RunOptions {
        ticks: cli.ticks,
        record: cli.record,
        listen_mocap: cli.listen_mocap,
        listen_bus: cli.listen_bus,
        listen_console: cli.listen_console,
        decimation: cli.decimation,
    };
    let summary = run(stage, &opts, offline_ticks, StopFlag::default()).map_err(|e| e.to_string())?;
    log::info!(
        "{} ticks, median {:?}, p99 {:?}",
        summary.ticks,
        summary.quantile(0.5),
        summary.quantile(0.99)
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match start(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
