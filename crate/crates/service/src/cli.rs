//! The `gce` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for bad or unreadable
//! data. `GCE_LOG_DIR`, when set, decides where logs are written: `serve`
//! puts its per-session logs there and `replay` writes its log there under
//! the file name given by `--out` (default `replay.jsonl`).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use gce_core::session::{
    analyze_log, generate_dataset, load_dataset, read_log, read_trace, replay, write_lines, GenParams, ReplayConfig,
    SessionError,
};
use gce_core::tracker::SensorModel;
use gce_core::Dataset;

use crate::server;
use crate::session::ServiceContext;

pub const LOG_DIR_ENV: &str = "GCE_LOG_DIR";

#[derive(Debug, Parser)]
#[command(name = "gce", version, about = "Gesture chart explorer: session service and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the WebSocket session service.
    Serve(ServeArgs),
    /// Replay a trace against a dataset and write the event log.
    Replay(ReplayArgs),
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Summarize an event log.
    Stats(StatsArgs),
    /// Check a trace or dataset file.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct EngineArgs {
    /// Sensor model overrides, e.g. `jitter=0.001,seed=3`. Keys: jitter,
    /// seed, min_depth, max_depth, fov_h, fov_v, occlusion, latch.
    #[arg(long, value_parser = parse_sensor)]
    sensor: Option<SensorSpec>,
    /// Disable the time-slice snap guard.
    #[arg(long)]
    no_snap_guard: bool,
}

impl EngineArgs {
    fn replay_config(&self) -> ReplayConfig {
        let mut cfg = ReplayConfig::default();
        if let Some(s) = self.sensor {
            cfg.sensor = s.model;
            cfg.sensor_seed = s.seed;
        }
        cfg.engine.snap_guard = !self.no_snap_guard;
        cfg
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["dataset", "gen"]))]
struct ServeArgs {
    #[arg(long, default_value_t = 8765)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Dataset file served as `default`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Serve a generated dataset instead.
    #[arg(long)]
    gen: bool,
    /// Seed for `--gen`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for per-session event logs.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Log file. Standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "replay")]
    session_id: String,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 39)]
    entities: usize,
    #[arg(long, default_value_t = 5)]
    vars: usize,
    #[arg(long, default_value_t = 150)]
    events: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    period: usize,
    #[arg(long, default_value_t = 4.0)]
    noise: f64,
    /// Output file. Standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    log: PathBuf,
    /// Print JSON instead of the text report.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["trace", "dataset"]))]
struct ValidateArgs {
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SensorSpec {
    model: SensorModel,
    seed: u64,
}

fn parse_sensor(s: &str) -> Result<SensorSpec, String> {
    let mut spec = SensorSpec {
        model: SensorModel::default(),
        seed: 0,
    };
    for part in s.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| format!("expected key=value, got `{part}`"))?;
        let num = || value.parse::<f64>().map_err(|_| format!("`{key}` needs a number, got `{value}`"));
        let int = || value.parse::<u64>().map_err(|_| format!("`{key}` needs an integer, got `{value}`"));
        let m = &mut spec.model;
        match key {
            "jitter" => m.jitter_std_m = num()?,
            "seed" => spec.seed = int()?,
            "min_depth" => m.min_depth_m = num()?,
            "max_depth" => m.max_depth_m = num()?,
            "fov_h" => m.fov_h_deg = num()?,
            "fov_v" => m.fov_v_deg = num()?,
            "occlusion" => m.occlusion_cone_deg = num()?,
            "latch" => m.dropout_latch_frames = int()?.try_into().map_err(|_| "latch is too large".to_string())?,
            _ => return Err(format!("unknown sensor key `{key}`")),
        }
    }
    spec.model.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Data { path: PathBuf, source: SessionError },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("server: {0}")]
    Serve(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Run with `GCE_LOG_DIR` from the environment.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with_log_dir(argv, std::env::var_os(LOG_DIR_ENV).map(PathBuf::from))
}

pub fn run_cli_with_log_dir<I, T>(argv: I, log_dir: Option<PathBuf>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Serve(a) => serve(a, log_dir),
        Command::Replay(a) => replay_cmd(a, log_dir),
        Command::Gen(a) => gen(a),
        Command::Stats(a) => stats(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gce: {e}");
            e.exit_code()
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn dataset_file(path: &Path) -> Result<Dataset, CliError> {
    load_dataset(&read_file(path)?).map_err(|source| CliError::Data {
        path: path.to_path_buf(),
        source,
    })
}

/// Write to `path`, or to standard output when there is none.
fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source,
    };
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io)?;
            }
            std::fs::write(p, text).map_err(io)
        }
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(io),
    }
}

fn serve(a: ServeArgs, log_dir: Option<PathBuf>) -> Result<(), CliError> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let ds = match &a.dataset {
        Some(path) => dataset_file(path)?,
        None => generate_dataset(&GenParams {
            seed: a.seed,
            ..GenParams::default()
        })?,
    };
    let log_dir = log_dir.or(a.log);
    if let Some(dir) = &log_dir {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    let mut ctx = ServiceContext::with_dataset("default", ds);
    ctx.replay = a.engine.replay_config();
    ctx.log_dir = log_dir;
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::Serve)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host, a.port))
            .await
            .map_err(CliError::Serve)?;
        server::serve(listener, Arc::new(ctx)).await.map_err(CliError::Serve)
    })
}

fn replay_cmd(a: ReplayArgs, log_dir: Option<PathBuf>) -> Result<(), CliError> {
    let ds = dataset_file(&a.dataset)?;
    let trace = read_trace(open(&a.trace)?).map_err(|source| CliError::Data {
        path: a.trace.clone(),
        source,
    })?;
    let mut cfg = a.engine.replay_config();
    cfg.session_id = a.session_id;
    let log = replay(Arc::new(ds), &trace, &cfg).map_err(|source| CliError::Data {
        path: a.trace.clone(),
        source,
    })?;
    let out = match log_dir {
        Some(dir) => {
            let name = a
                .out
                .as_deref()
                .and_then(Path::file_name)
                .map_or_else(|| OsString::from("replay.jsonl"), OsString::from);
            Some(dir.join(name))
        }
        None => a.out,
    };
    emit(out.as_deref(), &write_lines(&log))?;
    eprintln!("replayed {} records into {} log lines", trace.len(), log.len());
    Ok(())
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    let ds = generate_dataset(&GenParams {
        entities: a.entities,
        variables: a.vars,
        events: a.events,
        seed: a.seed,
        seasonal_period: a.period,
        noise_amp: a.noise,
        ..GenParams::default()
    })?;
    let mut text = serde_json::to_string(&ds).expect("datasets serialize");
    text.push('\n');
    emit(a.out.as_deref(), &text)
}

fn stats(a: StatsArgs) -> Result<(), CliError> {
    let data = |source| CliError::Data {
        path: a.log.clone(),
        source,
    };
    let log = read_log(open(&a.log)?).map_err(data)?;
    let stats = analyze_log(&log).map_err(data)?;
    let text = if a.json {
        serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n"
    } else {
        stats.report()
    };
    emit(None, &text)
}

fn validate(a: ValidateArgs) -> Result<(), CliError> {
    if let Some(path) = &a.trace {
        let trace = read_trace(open(path)?).map_err(|source| CliError::Data {
            path: path.clone(),
            source,
        })?;
        let span = trace.first().zip(trace.last()).map(|(f, l)| (f.t_ms, l.t_ms));
        match span {
            Some((t0, t1)) => println!("trace ok: {} records, {t0}..{t1} ms", trace.len()),
            None => println!("trace ok: empty"),
        }
    }
    if let Some(path) = &a.dataset {
        let ds = dataset_file(path)?;
        println!(
            "dataset ok: {} entities, {} variables, {} events",
            ds.entities.len(),
            ds.variable_count(),
            ds.event_count()
        );
    }
    Ok(())
}
