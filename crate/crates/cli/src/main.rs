//! `coast`: stage-by-stage and end-to-end intervention design from two CSV states.

mod bench;
mod config;
mod output;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{BenchStage, RunConfig};
use output::{Manifest, OutputDir};
use pipeline::Stage;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: 2, message: msg.into() }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        CliError { code: 1, message: msg.into() }
    }

    pub fn from_core(e: coast_core::Error) -> Self {
        CliError { code: if e.is_validation() { 2 } else { 1 }, message: e.to_string() }
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

#[derive(Parser)]
#[command(name = "coast", version, about = "Causal intervention design between a source and a target state")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Differential testing and regulator expansion.
    Select(StageArgs),
    /// Learn (or load) the shared graph.
    Discover(StageArgs),
    /// Fit both structural models and run the falsification check.
    Fit(StageArgs),
    /// Mechanism-change attribution and candidate selection.
    Attribute(StageArgs),
    /// Regularization path, persistence and target ranking.
    Optimize(StageArgs),
    /// Fixed-cardinality search over the `screen` candidates.
    Screen(StageArgs),
    /// Every stage; a config with a `bench` section runs the benchmark instead.
    Run(StageArgs),
    /// Synthetic benchmark against the mean-difference baseline.
    Bench(BenchArgs),
}

#[derive(Args)]
struct StageArgs {
    /// JSON run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON configuration with a `bench` section.
    #[arg(short, long, conflicts_with = "quick")]
    config: Option<PathBuf>,
    /// Ten-node preset: every k and sigma, five seeds.
    #[arg(long)]
    quick: bool,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => RunConfig::from_json(r#"{"schema_version": 1}"#, std::path::Path::new(".")),
    }
}

fn write_manifest(out: &mut OutputDir, command: &str, cfg: &RunConfig, failure: Option<(&str, &CliError)>) -> Result<(), CliError> {
    let artifacts = out.artifacts().to_vec();
    let m = Manifest {
        schema_version: config::SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command,
        status: if failure.is_some() { "failed" } else { "ok" },
        failed_stage: failure.map(|f| f.0),
        error: failure.map(|f| f.1.message.clone()),
        master_seed: cfg.seed,
        seed_streams: pipeline::SEED_STREAMS.to_vec(),
        config: cfg,
        artifacts: &artifacts,
    };
    out.write_json("manifest.json", "manifest", &m)
}

fn run_bench(command: &str, cfg: RunConfig, out_dir: PathBuf) -> Result<(), CliError> {
    let stage = cfg.bench.clone().ok_or_else(|| CliError::usage("config has no `bench` section"))?;
    let mut out = OutputDir::create(&out_dir)?;
    out.write_json("config.json", "config", &cfg)?;
    let r = bench::run(&stage, &mut out);
    let failure = r.as_ref().err().map(|e| ("bench", e));
    write_manifest(&mut out, command, &cfg, failure)?;
    r.map(|_| ())
}

fn run_stages(command: &str, last: Stage, args: StageArgs) -> Result<(), CliError> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(s) = args.source {
        cfg.source = Some(s);
    }
    if let Some(t) = args.target {
        cfg.target = Some(t);
    }
    if let Some(o) = args.out {
        cfg.output_dir = o;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out_dir = cfg.output_dir.clone();
    if cfg.bench.is_some() {
        if command != "run" {
            return Err(CliError::usage(format!("`{command}` does not accept a bench config; use `run` or `bench`")));
        }
        return run_bench(command, cfg, out_dir);
    }
    cfg.validate_inputs()?;
    let mut out = OutputDir::create(&out_dir)?;
    out.write_json("config.json", "config", &cfg)?;
    let r = pipeline::run(&cfg, last, &mut out);
    let failure = r.as_ref().err().map(|f| (f.stage.name(), &f.error));
    write_manifest(&mut out, command, &cfg, failure)?;
    r.map_err(|f| {
        let msg = format!("stage `{}` failed: {}", f.stage.name(), f.error.message);
        CliError { code: f.error.code, message: msg }
    })
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("COAST_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| CliError::usage(format!("COAST_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::internal(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Select(a) => run_stages("select", Stage::Select, a),
        Command::Discover(a) => run_stages("discover", Stage::Discover, a),
        Command::Fit(a) => run_stages("fit", Stage::Fit, a),
        Command::Attribute(a) => run_stages("attribute", Stage::Attribute, a),
        Command::Optimize(a) => run_stages("optimize", Stage::Optimize, a),
        Command::Screen(a) => run_stages("screen", Stage::Screen, a),
        Command::Run(a) => run_stages("run", Stage::Optimize, a),
        Command::Bench(a) => {
            let mut cfg = if a.quick {
                RunConfig::bench_only(BenchStage::quick())
            } else {
                let cfg = load_config(a.config.as_ref())?;
                if cfg.bench.is_none() {
                    return Err(CliError::usage("bench needs --quick or a config with a `bench` section"));
                }
                cfg
            };
            if let Some(o) = a.out {
                cfg.output_dir = o;
            }
            let dir = cfg.output_dir.clone();
            run_bench("bench", cfg, dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match std::panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
        Err(_) => ExitCode::from(1),
    }
}
