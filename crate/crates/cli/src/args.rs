use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rashgam_core::apps::Direction;
use rashgam_core::rset_fit::OptimizerConfig;

#[derive(Debug, Parser)]
#[command(name = "rashgam", version, about = "Rashomon sets of sparse binned logistic GAMs")]
pub struct Cli {
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads for the numerical kernels.
    #[arg(long, global = true, env = "RASHGAM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fit the penalized ERM on binned data and write model.json.
    Fit(FitArgs),
    /// Approximate the Rashomon set of a model by an ellipsoid.
    Rset(RsetArgs),
    /// Slice the ellipsoid along sampled bin-merge plans.
    Block(BlockArgs),
    /// Variable-importance ranges for every feature.
    Vi(ViArgs),
    /// Closest monotone model inside the ellipsoid metric.
    Monotone(MonotoneArgs),
    /// Project a requested coefficient vector onto the ellipsoid.
    Project(ProjectArgs),
    /// Uniform samples from the ellipsoid.
    Sample(SampleArgs),
    /// Share of sampled models that jump at a bin boundary.
    Jumps(JumpsArgs),
    /// Fraction of ellipsoid samples whose true loss is under the threshold.
    Precision(PrecisionArgs),
    /// Precision and volume of the ellipsoid rescaled by several factors.
    Tradeoff(TradeoffArgs),
    /// Sliced versus directly fitted ellipsoids on sampled merge plans.
    Ratios(RatiosArgs),
    /// Coordinate-wise in-set intervals found by bisection on the loss.
    BoxVolume(BoxArgs),
    /// Serve the JSON API over a model and ellipsoid.
    Serve(ServeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// CSV with a header row; the last column is the 0/1 label.
    #[arg(long)]
    pub data: PathBuf,
    /// Maximum quantile bins per feature.
    #[arg(long, default_value_t = 32, conflicts_with = "edges")]
    pub bins: usize,
    /// JSON array of per-feature bin edge arrays, instead of quantile bins.
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.001)]
    pub lambda2: f64,
    #[arg(long, default_value_t = 0.001)]
    pub lambdas: f64,
}

/// Model plus the training data, which defaults to the path recorded in the
/// model at fit time.
#[derive(Debug, Args, Serialize)]
pub struct ModelData {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize, Clone, Copy)]
pub struct OptimizerArgs {
    /// Weight of the overflow penalty.
    #[arg(long = "c")]
    pub c: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub samples_per_iter: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub eval_samples: Option<usize>,
}

impl OptimizerArgs {
    pub fn apply(&self, mut o: OptimizerConfig) -> OptimizerConfig {
        if let Some(v) = self.c {
            o.c = v;
        }
        if let Some(v) = self.lr {
            o.learning_rate = v;
        }
        if let Some(v) = self.iters {
            o.iterations = v;
        }
        if let Some(v) = self.samples_per_iter {
            o.samples_per_iter = v;
        }
        if let Some(v) = self.eval_every {
            o.eval_every = v;
        }
        if let Some(v) = self.eval_samples {
            o.eval_samples = v;
        }
        o
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RsetArgs {
    #[command(flatten)]
    pub input: ModelData,
    /// Threshold as a multiple of the ERM loss.
    #[arg(long, default_value_t = 1.01)]
    pub theta_mult: f64,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BlockArgs {
    #[command(flatten)]
    pub input: ModelData,
    #[arg(long)]
    pub ellipsoid: PathBuf,
    /// Number of steps after merging (default: 90% of the current count).
    #[arg(long)]
    pub k_tilde: Option<usize>,
    /// Plans to draw.
    #[arg(long, default_value_t = 1000)]
    pub candidates: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelEllipsoid {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub ellipsoid: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ViArgs {
    #[command(flatten)]
    pub input: ModelEllipsoid,
    /// Hold every other coordinate at the center.
    #[arg(long)]
    pub fix_others: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionArg {
    Increasing,
    Decreasing,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Increasing => Direction::Increasing,
            DirectionArg::Decreasing => Direction::Decreasing,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MonotoneArgs {
    #[command(flatten)]
    pub input: ModelEllipsoid,
    /// Feature name or index.
    #[arg(long)]
    pub feature: String,
    #[arg(long, value_enum, default_value = "increasing")]
    pub direction: DirectionArg,
    /// Further constraints as `feature:increasing` or `feature:decreasing`.
    #[arg(long = "also")]
    pub also: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct ProjectArgs {
    #[arg(long)]
    pub ellipsoid: PathBuf,
    /// JSON file holding `{"omega_req": [...]}` or a bare array.
    #[arg(long)]
    pub request: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub ellipsoid: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct JumpsArgs {
    #[command(flatten)]
    pub input: ModelEllipsoid,
    #[arg(long)]
    pub feature: String,
    /// Boundary between bins `k` and `k + 1`.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PrecisionArgs {
    #[command(flatten)]
    pub input: ModelData,
    #[arg(long)]
    pub ellipsoid: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TradeoffArgs {
    #[command(flatten)]
    pub input: ModelData,
    #[arg(long)]
    pub ellipsoid: PathBuf,
    /// Linear scale factors.
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.8,0.9,1.0,1.1,1.2,1.5")]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct RatiosArgs {
    #[command(flatten)]
    pub input: ModelData,
    #[arg(long)]
    pub ellipsoid: PathBuf,
    #[arg(long)]
    pub k_tilde: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub plans: usize,
    #[arg(long, default_value_t = 10_000)]
    pub candidates: usize,
    /// Precision samples per plan and method.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Settings of the direct fits.
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BoxArgs {
    #[command(flatten)]
    pub input: ModelData,
    /// Take the threshold and center from this ellipsoid and compare its
    /// axis segments with the intervals.
    #[arg(long)]
    pub ellipsoid: Option<PathBuf>,
    /// Threshold multiple of the model's loss when no ellipsoid is given.
    #[arg(long, default_value_t = 1.01)]
    pub theta_mult: f64,
    #[arg(long, default_value_t = rashgam_core::box_oracle::DEFAULT_DELTA)]
    pub delta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[command(flatten)]
    pub input: ModelEllipsoid,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}
