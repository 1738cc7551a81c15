//! The `ppinf` command line: feature building, synthetic data, sampling,
//! training, α sweeps, region forecasting and report merging.
//!
//! Exit codes: 0 success, 1 internal error, 2 bad input, 3 divergence.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult, ExitCode};

#[derive(Debug, Parser)]
#[command(name = "ppinf", version, about = "Propagation-based influence prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every configurable command.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override any config key, e.g. `--set train.epochs=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute node features and write a CSV plus a JSON schema sidecar.
    Features {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Edge list (`data.graph`).
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Embeddings file (`data.embeddings`).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// DeepWalk width (`features.deepwalk_dim`).
        #[arg(long)]
        deepwalk_dim: Option<usize>,
    },
    /// Simulate cascades on a small-world graph and emit labeled instances.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        cascades: Option<usize>,
        #[arg(long)]
        edge_prob: Option<f64>,
    },
    /// Sample ego instances from a graph and two activation snapshots.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Active ids at observation time (`data.activation_t`).
        #[arg(long)]
        active_t: Option<PathBuf>,
        /// Active ids at label time (`data.activation_next`).
        #[arg(long)]
        active_next: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Nodes per ego sample (`sampler.sample_size`).
        #[arg(long)]
        sample_size: Option<usize>,
    },
    /// Train one model and evaluate it on the test split.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train every (head, alpha, K) cell of the sweep grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        instances: Option<PathBuf>,
        /// Concurrent cells (`sweep.workers`).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Rolling-origin region forecast scored by APME.
    Forecast {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Region series CSV (`data.series`).
        #[arg(long)]
        series: Option<PathBuf>,
        /// Region edge list (`data.series_edges`).
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Largest horizon in days, 1 to 6 (`forecast.horizon`).
        #[arg(long)]
        horizon: Option<usize>,
        /// `classifier` or `oracle` (`forecast.growth_model`).
        #[arg(long)]
        growth_model: Option<String>,
    },
    /// Merge run artifacts under a directory into one summary.
    Report {
        /// Directory holding run outputs.
        dir: PathBuf,
        /// Where to write the report; defaults to `dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Instance file (`data.instances`).
    #[arg(long)]
    pub instances: Option<PathBuf>,
    /// GCN, GAT, PPNP, APPNP or DEEPPP.
    #[arg(long)]
    pub head: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Power iterations (`propagation.k_iters`).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

fn push<T: ToString>(sets: &mut Vec<String>, key: &str, value: &Option<T>, quote: bool) {
    if let Some(v) = value {
        let v = v.to_string();
        let lit = if quote { toml::Value::String(v).to_string() } else { v };
        sets.push(format!("{key}={lit}"));
    }
}

/// Floats keep exponent notation so TOML reads them back as floats.
fn push_f64(sets: &mut Vec<String>, key: &str, value: &Option<f64>) {
    push(sets, key, &value.map(|v| format!("{v:?}")), false);
}

fn path_set(sets: &mut Vec<String>, key: &str, value: &Option<PathBuf>) {
    push(sets, key, &value.as_ref().map(|p| p.display().to_string()), true);
}

fn resolve(common: &Common, extra: Vec<String>, seed: Option<u64>) -> CliResult<ExperimentConfig> {
    let mut sets = extra;
    sets.extend(common.sets.iter().cloned());
    let mut cfg = ExperimentConfig::resolve(common.config.as_deref(), &sets, seed)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

/// Runs one command and returns its result without exiting.
pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Features { common, seed, graph, embeddings, deepwalk_dim } => {
            let mut s = Vec::new();
            path_set(&mut s, "data.graph", &graph);
            path_set(&mut s, "data.embeddings", &embeddings);
            push(&mut s, "features.deepwalk_dim", &deepwalk_dim, false);
            commands::features::run(&resolve(&common, s, seed)?)
        }
        Command::Generate { common, seed, nodes, cascades, edge_prob } => {
            let mut s = Vec::new();
            push(&mut s, "synthetic.nodes", &nodes, false);
            push(&mut s, "synthetic.cascades", &cascades, false);
            push_f64(&mut s, "synthetic.edge_prob", &edge_prob);
            commands::generate::run(&resolve(&common, s, Some(seed))?)
        }
        Command::Sample { common, seed, graph, active_t, active_next, embeddings, sample_size } => {
            let mut s = Vec::new();
            path_set(&mut s, "data.graph", &graph);
            path_set(&mut s, "data.activation_t", &active_t);
            path_set(&mut s, "data.activation_next", &active_next);
            path_set(&mut s, "data.embeddings", &embeddings);
            push(&mut s, "sampler.sample_size", &sample_size, false);
            commands::sample::run(&resolve(&common, s, seed)?)
        }
        Command::Train { common, seed, model } => {
            let mut s = Vec::new();
            path_set(&mut s, "data.instances", &model.instances);
            push(&mut s, "propagation.head", &model.head.map(|h| h.to_uppercase()), true);
            push_f64(&mut s, "propagation.alpha", &model.alpha);
            push(&mut s, "propagation.k_iters", &model.k, false);
            push(&mut s, "train.epochs", &model.epochs, false);
            push_f64(&mut s, "train.learning_rate", &model.learning_rate);
            push(&mut s, "train.batch_size", &model.batch_size, false);
            commands::train::run(&resolve(&common, s, Some(seed))?)
        }
        Command::Sweep { common, seed, instances, workers } => {
            let mut s = Vec::new();
            path_set(&mut s, "data.instances", &instances);
            push(&mut s, "sweep.workers", &workers, false);
            commands::sweep::run(&resolve(&common, s, Some(seed))?)
        }
        Command::Forecast { common, seed, series, edges, horizon, growth_model } => {
            let mut s = Vec::new();
            path_set(&mut s, "data.series", &series);
            path_set(&mut s, "data.series_edges", &edges);
            push(&mut s, "forecast.horizon", &horizon, false);
            push(&mut s, "forecast.growth_model", &growth_model.map(|g| g.to_lowercase()), true);
            commands::forecast::run(&resolve(&common, s, seed)?)
        }
        Command::Report { dir, out } => commands::report::run(&dir, out.as_deref()),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::BadInput } else { ExitCode::Ok };
            let _ = e.print();
            return code as i32;
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::Ok as i32,
        Err(e) => {
            eprintln!("error: {e}");
            e.code as i32
        }
    }
}
