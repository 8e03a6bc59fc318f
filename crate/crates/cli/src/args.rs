use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hypersparse", version, about = "Online spectral sparsification of hypergraph streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic hypergraph stream.
    Gen(GenArgs),
    /// Sparsify a stream in one online pass.
    Sparsify(SparsifyArgs),
    /// Check a sparsifier against its original stream.
    Verify(VerifyArgs),
    /// Re-run a sparsification from its manifest and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankDistArg {
    Fixed,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Uniform,
    Planted,
    Graph,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of vertices.
    #[arg(long)]
    pub n: usize,
    /// Number of hyperedges.
    #[arg(long)]
    pub m: usize,
    /// Edge size, or the maximum size with `--rank-dist uniform`.
    #[arg(long)]
    pub rank: usize,
    #[arg(long, value_enum, default_value_t = RankDistArg::Fixed)]
    pub rank_dist: RankDistArg,
    /// Constant edge weight.
    #[arg(long, conflicts_with_all = ["wmin", "wmax"])]
    pub weight: Option<f64>,
    /// Lower end of log-uniform weights.
    #[arg(long, requires = "wmax")]
    pub wmin: Option<f64>,
    /// Upper end of log-uniform weights.
    #[arg(long, requires = "wmin")]
    pub wmax: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModelArg::Uniform)]
    pub model: ModelArg,
    /// Block count for the planted model.
    #[arg(long, default_value_t = 4)]
    pub blocks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; standard output when omitted.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizerArgs {
    /// Duality-gap tolerance of the reweighting optimizer.
    #[arg(long, default_value_t = 1e-7)]
    pub gap_tol: f64,
    /// Iteration cap of the reweighting optimizer.
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Line-search interval tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub line_search_tol: f64,
    /// Rank-one updates between refactorizations of the inverse.
    #[arg(long, default_value_t = 4096)]
    pub refresh_period: usize,
}

#[derive(Debug, Args)]
pub struct SparsifyArgs {
    /// Input stream.
    #[arg(long)]
    pub input: PathBuf,
    /// Multiplicative error ε in (0, 1).
    #[arg(long)]
    pub epsilon: f64,
    /// Additive error δ in (0, 1).
    #[arg(long, required_unless_present = "eps_mode", conflicts_with = "eps_mode")]
    pub delta: Option<f64>,
    /// Derive δ = ε w_min² n^(-2r) so the result is a pure multiplicative sparsifier.
    #[arg(long, requires_all = ["wmin", "wmax"])]
    pub eps_mode: bool,
    /// Smallest edge weight in the stream (eps mode).
    #[arg(long)]
    pub wmin: Option<f64>,
    /// Largest edge weight in the stream (eps mode); heavier edges abort the run.
    #[arg(long)]
    pub wmax: Option<f64>,
    /// Maximum hyperedge size.
    #[arg(long)]
    pub rank_bound: usize,
    /// Oversampling multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    /// Sparsifier output path.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-step telemetry, JSON lines.
    #[arg(long)]
    pub telemetry: Option<PathBuf>,
    /// Per-step clique reweightings, JSON lines.
    #[arg(long)]
    pub emit_reweightings: Option<PathBuf>,
    /// Run manifest, JSON.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub sparsifier: PathBuf,
    #[arg(long)]
    pub epsilon: f64,
    /// Additive error δ ≥ 0.
    #[arg(long)]
    pub delta: f64,
    /// Rank bound used for the run; needed for telemetry checks and Monte Carlo.
    #[arg(long)]
    pub rank_bound: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Telemetry from the run: enables potential, KKT and size checks.
    #[arg(long)]
    pub telemetry: Option<PathBuf>,
    /// Reweightings from the run: enables trace and energy-comparison checks.
    #[arg(long)]
    pub reweightings: Option<PathBuf>,
    /// Number of probe vectors.
    #[arg(long, default_value_t = 10_000)]
    pub probes: usize,
    /// Exhaustive cut check when n is at most this.
    #[arg(long, default_value_t = 16)]
    pub max_cut_n: usize,
    /// Monte Carlo unbiasedness runs; 0 disables.
    #[arg(long, default_value_t = 0)]
    pub seeds: usize,
    /// Seed for probes and the first Monte Carlo run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; standard output when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the reproduced sparsifier; only hashed when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
