use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use einstall_core::capsule::{ingest_directory, open_capsule, Capsule};
use einstall_core::harness::{
    compute_metrics, run_scripted, HarnessError, Trace, Visit, VisitConfig, WalkScript,
};
use einstall_core::protocol::{serve, Hub, ServerConfig, DEFAULT_TCP_PORT, DEFAULT_WS_PORT};
use einstall_core::scene::{builtin_scene, parse_manifest, SceneManifest, BUILTIN_NAMES};
use einstall_core::tracking::SensorConfig;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "einstall",
    version,
    about = "Re-enact virtualized media installations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scene manifest.
    Validate { manifest: PathBuf },
    /// Run a scripted visit and write its trace.
    Run {
        #[command(flatten)]
        visit: VisitArgs,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        ticks: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a trace file.
    Metrics { trace: PathBuf },
    /// Serve live visits over TCP and WebSocket.
    Serve {
        #[command(flatten)]
        visit: VisitArgs,
        #[arg(long, default_value_t = DEFAULT_TCP_PORT)]
        tcp_port: u16,
        #[arg(long, default_value_t = DEFAULT_WS_PORT)]
        ws_port: u16,
    },
    /// Build a capsule from a <city>/<slot>/<media> source tree.
    Ingest {
        src: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct VisitArgs {
    /// Manifest path, or one of the built-in scenes (vf, mc).
    #[arg(long)]
    scene: String,
    #[arg(long)]
    capsule: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    delay_emulation: bool,
    #[arg(long)]
    kappa_max: Option<f64>,
    #[arg(long)]
    steer_gain: Option<f64>,
    /// JSON array of sensor configs replacing the default ring.
    #[arg(long)]
    sensors: Option<PathBuf>,
}

/// Exit status 1 is for bad input, 2 for everything that went wrong at run
/// time.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn invalid(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = match cli.command {
        Command::Serve { .. } => "info",
        _ => "warn",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)),
        )
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Validate { manifest } => validate(&manifest),
        Command::Run {
            visit,
            script,
            ticks,
            out,
        } => run(&visit, &script, ticks, &out),
        Command::Metrics { trace } => metrics(&trace),
        Command::Serve {
            visit,
            tcp_port,
            ws_port,
        } => serve_forever(&visit, tcp_port, ws_port),
        Command::Ingest { src, out } => ingest(&src, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(runtime)
}

fn load_manifest(path: &Path) -> CliResult<SceneManifest> {
    let bytes = read_file(path)?;
    parse_manifest(&bytes)
        .with_context(|| format!("{} is not a valid manifest", path.display()))
        .map_err(invalid)
}

fn load_scene(scene: &str) -> CliResult<SceneManifest> {
    if BUILTIN_NAMES.contains(&scene) {
        return builtin_scene(scene).map_err(invalid);
    }
    load_manifest(Path::new(scene))
}

fn validate(path: &Path) -> CliResult<()> {
    let manifest = load_manifest(path)?;
    println!(
        "ok: {} ({} nodes, {} channels, {} projectors, {} speakers, {} widgets)",
        manifest.scene_id,
        manifest.nodes.len(),
        manifest.channels.len(),
        manifest.projectors.len(),
        manifest.speakers.len(),
        manifest.widgets.len()
    );
    Ok(())
}

struct Prepared {
    manifest: Arc<SceneManifest>,
    capsule: Option<Arc<Capsule>>,
    config: VisitConfig,
}

fn prepare(args: &VisitArgs) -> CliResult<Prepared> {
    let manifest = load_scene(&args.scene)?;
    let capsule = match &args.capsule {
        Some(dir) => Some(Arc::new(
            open_capsule(dir)
                .with_context(|| format!("cannot open capsule {}", dir.display()))
                .map_err(invalid)?,
        )),
        None => None,
    };
    let mut config = VisitConfig::default();
    config.engine.delay_emulation = args.delay_emulation;
    if let Some(kappa_max) = args.kappa_max {
        config.compression.kappa_max = kappa_max;
    }
    if let Some(gain) = args.steer_gain {
        config.compression.steer_gain = gain;
    }
    if let Some(path) = &args.sensors {
        let bytes = read_file(path)?;
        config.sensors = serde_json::from_slice::<Vec<SensorConfig>>(&bytes)
            .with_context(|| format!("{} is not a sensor list", path.display()))
            .map_err(invalid)?;
    }
    Ok(Prepared {
        manifest: Arc::new(manifest),
        capsule,
        config,
    })
}

fn harness_failure(err: HarnessError) -> Failure {
    match err {
        HarnessError::Io(_) => runtime(err),
        _ => invalid(err),
    }
}

fn run(args: &VisitArgs, script: &Path, ticks: u64, out: &Path) -> CliResult<()> {
    let prepared = prepare(args)?;
    let bytes = read_file(script)?;
    let script: WalkScript = serde_json::from_slice(&bytes)
        .with_context(|| format!("{} is not a walk script", script.display()))
        .map_err(invalid)?;
    let trace = run_scripted(
        prepared.manifest,
        prepared.capsule,
        &script,
        &prepared.config,
        args.seed,
        ticks,
    )
    .map_err(harness_failure)?;
    let file = File::create(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(runtime)?;
    trace
        .write_ndjson(BufWriter::new(file))
        .with_context(|| format!("cannot write {}", out.display()))
        .map_err(runtime)?;
    println!(
        "{} records, trace_hash {:016x}",
        trace.records.len(),
        trace.hash()
    );
    Ok(())
}

fn metrics(path: &Path) -> CliResult<()> {
    let file = File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(runtime)?;
    let trace = Trace::read_ndjson(BufReader::new(file)).map_err(harness_failure)?;
    let report = compute_metrics(&trace).map_err(harness_failure)?;
    let text = serde_json::to_string_pretty(&report).map_err(runtime)?;
    println!("{text}");
    Ok(())
}

fn serve_forever(args: &VisitArgs, tcp_port: u16, ws_port: u16) -> CliResult<()> {
    let prepared = prepare(args)?;
    let seed = args.seed;
    let tick_rate = prepared.config.engine.tick_rate;
    let Prepared {
        manifest,
        capsule,
        config,
    } = prepared;
    let hub = Hub::new(Box::new(move || {
        Visit::new(manifest.clone(), capsule.clone(), config.clone(), seed)
    }))
    .map_err(invalid)?;

    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(async move {
        let handle = serve(hub, ServerConfig::new(tcp_port, ws_port, tick_rate))
            .await
            .map_err(|e| runtime(anyhow!(e).context("cannot bind")))?;
        eprintln!(
            "serving on tcp {} and ws://{}/ws",
            handle.tcp_addr, handle.ws_addr
        );
        tokio::signal::ctrl_c().await.map_err(runtime)?;
        handle.shutdown().await;
        Ok(())
    })
}

fn ingest(src: &Path, out: &Path) -> CliResult<()> {
    let capsule = ingest_directory(src, out)
        .with_context(|| format!("cannot ingest {}", src.display()))
        .map_err(invalid)?;
    println!(
        "ingested {} items under {} keys into {}",
        capsule.item_count(),
        capsule.keys().count(),
        out.display()
    );
    Ok(())
}
