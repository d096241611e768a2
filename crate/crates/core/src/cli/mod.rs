//! Command line front end: `infer`, `coverage`, `highdim`, `timeseries`
//! and `rerun`.
//!
//! Exit codes: 0 success, 1 I/O, 2 usage or configuration, 3 numeric or
//! divergence, 4 too many failed simulations.

mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::execute;
pub use config::{parse_config, read_config_file, Overrides, RunConfig};
pub use manifest::{CommandKind, RunManifest, MANIFEST_FILE};

use crate::error::{Error, Result};
use crate::model::LossModel;
use crate::presets::{Method, PresetName};

/// Environment variable with the default worker count.
pub const THREADS_ENV: &str = "NEWTON_INFER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "newton-infer", version, about = "Stochastic-gradient statistical inference for M-estimators")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point estimate, covariance and confidence intervals for one data set.
    Infer(RunArgs),
    /// Monte Carlo coverage of the confidence intervals.
    Coverage(RunArgs),
    /// ℓ1-regularized inference with de-biased p-values.
    Highdim(RunArgs),
    /// Inference for dependent data with circular-block sampling.
    Timeseries(RunArgs),
    /// Reproduce the outputs recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory (default: the manifest's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallel: Option<usize>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub preset: Option<PresetName>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "newton-infer-out")]
    pub out: PathBuf,
    /// Worker threads (default: $NEWTON_INFER_THREADS, else all cores).
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Also write a dense oracle covariance.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub method: Option<Method>,
    /// Block length for time-series inference.
    #[arg(long)]
    pub lag: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub dense_limit: Option<usize>,
    #[arg(long)]
    pub sims: Option<usize>,
    #[arg(long = "d-o")]
    pub d_o: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
    /// Dataset CSV with columns `x1,...,xp,y`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<LossModel>,
}

fn parse_loss(s: &str) -> std::result::Result<LossModel, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown loss `{s}` (squared_linear, logistic, mean_estimation)"))
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::config(THREADS_ENV, format!("not a thread count: `{v}`")))?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if n == 0 {
        return Err(Error::config("parallel", "must be at least 1"));
    }
    Ok(n)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::usage(format!("cannot start worker threads: {e}")))?;
    pool.install(f)
}

/// Resolve the configuration of a run command.
pub fn resolve(kind: CommandKind, args: &RunArgs) -> Result<RunConfig> {
    let default_preset = match kind {
        CommandKind::Highdim => PresetName::HighDimNull,
        CommandKind::Timeseries => PresetName::TsMa,
        CommandKind::Infer | CommandKind::Coverage => PresetName::Lin1,
    };
    let file = args.config.as_deref().map(read_config_file).transpose()?;
    let data_path = args.data.as_deref().map(std::fs::canonicalize).transpose()?;
    let flags = Overrides {
        seed: args.seed,
        method: args.method,
        lag: args.lag,
        lambda: args.lambda,
        omega: args.omega,
        dense_limit: args.dense_limit,
        n_sims: args.sims,
        d_o: args.d_o,
        level: args.level,
        data_path,
        loss: args.loss,
        oracle: args.oracle,
    };
    let mut cfg = parse_config(default_preset, args.preset, file.as_ref(), &flags)?;
    let forced = match kind {
        CommandKind::Highdim => Some(Method::HighDim),
        CommandKind::Timeseries => Some(Method::TimeSeries),
        _ => None,
    };
    if let Some(m) = forced {
        if args.method.is_some_and(|a| a != m) {
            return Err(Error::config("method", format!("`{}` only runs the `{m}` method", kind.as_str())));
        }
        cfg.method = m;
    }
    Ok(cfg)
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    let (kind, args) = match cmd {
        Command::Infer(a) => (CommandKind::Infer, a),
        Command::Coverage(a) => (CommandKind::Coverage, a),
        Command::Highdim(a) => (CommandKind::Highdim, a),
        Command::Timeseries(a) => (CommandKind::Timeseries, a),
        Command::Rerun { manifest, out, parallel } => {
            let m = RunManifest::load(&manifest)?;
            if m.version != env!("CARGO_PKG_VERSION") {
                log::warn!("manifest written by version {}, running {}", m.version, env!("CARGO_PKG_VERSION"));
            }
            m.config.validate()?;
            let dir = match out {
                Some(d) => d,
                None => manifest.parent().map(PathBuf::from).unwrap_or_default(),
            };
            let threads = thread_count(parallel)?;
            in_pool(threads, || execute(m.command, &m.config, &dir, threads))?;
            return Ok(());
        }
    };
    let cfg = resolve(kind, &args)?;
    let threads = thread_count(args.parallel)?;
    in_pool(threads, || execute(kind, &cfg, &args.out, threads))?;
    Ok(())
}
