use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use muxrisk::netmodel::Attribute;
use muxrisk::windows::WindowSpec;

#[derive(Debug, Parser)]
#[command(
    name = "muxrisk",
    version,
    about = "Multilayer loan-network risk scoring"
)]
pub struct Cli {
    /// Directory that receives all outputs.
    #[arg(long, global = true, env = "MUXRISK_OUT_DIR", default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic loan dataset (loans.csv).
    Synth(SynthArgs),
    /// Solve every window and write one score file per window (scores/).
    Score(RunArgs),
    /// Solve every window and write the long-format series table (series.csv).
    Series(RunArgs),
    /// Cluster district or product series with DTW k-means.
    Cluster(ClusterArgs),
    /// Compare one district/product pair against its default rate.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON generator config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_loans: Option<usize>,
    #[arg(long)]
    pub n_products: Option<usize>,
    #[arg(long)]
    pub n_districts: Option<usize>,
    #[arg(long)]
    pub span_months: Option<u32>,
    #[arg(long)]
    pub base_default_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct WindowArgs {
    /// Window length in months.
    #[arg(long = "window", default_value_t = WindowSpec::DEFAULT_WINDOW_MONTHS)]
    pub window_months: u32,
    /// Months between consecutive window starts.
    #[arg(long = "step", default_value_t = WindowSpec::DEFAULT_STEP_MONTHS)]
    pub step_months: u32,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SolverArgs {
    /// Probability of following an edge rather than restarting.
    #[arg(long, default_value_t = 0.85)]
    pub restart: f64,
    /// L1 convergence tolerance of the power iteration.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Loan records CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Worker threads; windows are solved in parallel, each solve stays sequential.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("clusters").required(true).args(["k", "k_range"])))]
pub struct ClusterArgs {
    /// Long-format series CSV written by `series`.
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long, default_value = "product")]
    pub kind: Attribute,
    /// Fixed number of clusters.
    #[arg(long)]
    pub k: Option<usize>,
    /// Inclusive range `LO..HI`; k is picked at the elbow of the inertia curve.
    #[arg(long, value_parser = parse_k_range)]
    pub k_range: Option<RangeInclusive<usize>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// k-means iteration cap.
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Loan records CSV the series were computed from.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub series: PathBuf,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long)]
    pub district: String,
    #[arg(long)]
    pub product: String,
}

fn parse_k_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected LO..HI, got {s:?}"))?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let lo: usize = lo
        .trim()
        .parse()
        .map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: usize = hi
        .trim()
        .parse()
        .map_err(|e| format!("bad upper bound: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}..{hi}"));
    }
    Ok(lo..=hi)
}
