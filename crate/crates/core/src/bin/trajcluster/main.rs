//! `trajcluster` command-line entry point.

mod commands;
mod manifest;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use trajcluster::SegmentMode;

/// Seed used when none is given on the command line.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "trajcluster", version, about = "Cluster network-constrained trajectories and road segments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic grid network and a trajectory corpus with planted groups.
    Generate(GenerateArgs),
    /// Cluster trajectories into a significance-tested hierarchy.
    ClusterTrajectories(ClusterArgs),
    /// Cluster traveled road segments (loose or strict similarity graph).
    ClusterSegments(SegmentArgs),
    /// Compare a predicted labelling with ground truth (adjusted Rand index).
    Eval(EvalArgs),
    /// Average-linkage agglomerative baseline cut at k clusters.
    Baseline(BaselineArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Grid size as WIDTHxHEIGHT nodes, e.g. 8x8.
    #[arg(long, value_parser = parse_grid)]
    grid: (usize, usize),
    /// CSV with header `origin,destination,count,detour_probability`.
    #[arg(long)]
    groups: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Base segment length in meters.
    #[arg(long, default_value_t = 100.0)]
    segment_length: f64,
    /// Relative length jitter in [0, 1).
    #[arg(long, default_value_t = 0.1)]
    jitter: f64,
}

#[derive(Args, Debug, Clone)]
struct ClusterArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    trajectories: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Randomized graphs per significance test.
    #[arg(long, default_value_t = 30)]
    null_samples: usize,
    /// Observed modularity must exceed this quantile of the null optima.
    #[arg(long, default_value_t = 0.95)]
    significance_quantile: f64,
    /// Hierarchy depth(s) to export as flat cuts.
    #[arg(long, default_values_t = [1usize])]
    depth: Vec<usize>,
    /// Also export the similarity graph.
    #[arg(long)]
    export_graph: bool,
    #[arg(long, value_enum, default_value_t = GraphFormat::Csv)]
    graph_format: GraphFormat,
    /// Seeded optimizer restarts in addition to the deterministic run.
    #[arg(long, default_value_t = 2)]
    restarts: usize,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[command(flatten)]
    cluster: ClusterArgs,
    #[arg(long, value_parser = parse_mode)]
    mode: SegmentMode,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// CSV `entity_id,cluster_label`.
    #[arg(long)]
    predicted: PathBuf,
    /// CSV `entity_id,label`, e.g. `trajectory_id,group_label`.
    #[arg(long)]
    truth: PathBuf,
    /// Optional directory for `eval.json` and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    trajectories: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Entity::Trajectories)]
    entity: Entity,
    /// Segment graph mode when `--entity segments`.
    #[arg(long, value_parser = parse_mode, default_value = "loose")]
    mode: SegmentMode,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
enum GraphFormat {
    Csv,
    Dot,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
enum Entity {
    Trajectories,
    Segments,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let w = w.parse().map_err(|_| format!("invalid width `{w}`"))?;
    let h = h.parse().map_err(|_| format!("invalid height `{h}`"))?;
    Ok((w, h))
}

fn parse_mode(s: &str) -> Result<SegmentMode, String> {
    s.parse()
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("TRAJCLUSTER_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .with_context(|| format!("TRAJCLUSTER_THREADS must be a non-negative integer, got `{value}`"))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    configure_threads()?;
    match cli.command {
        Command::Generate(args) => commands::generate(&args),
        Command::ClusterTrajectories(args) => commands::cluster(&args, None),
        Command::ClusterSegments(args) => commands::cluster(&args.cluster, Some(args.mode)),
        Command::Eval(args) => commands::eval(&args),
        Command::Baseline(args) => {
            if args.k == 0 {
                bail!("--k must be at least 1");
            }
            commands::baseline(&args)
        }
    }
}
