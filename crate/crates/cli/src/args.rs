use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cuboid3d::eval::{threshold_grid, DepthBands, EvalConfig};

use crate::commands::{BenchFlags, EvalFlags, IouFlags, StatsFlags};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "cuboid3d", version, about = "Oriented-cuboid IoU, AP3D evaluation and dataset statistics")]
pub struct Cli {
    /// Worker threads for the IoU, evaluation and statistics kernels.
    /// Numeric results never depend on it.
    #[arg(long, global = true, env = crate::THREADS_ENV)]
    pub threads: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predictions against ground truth with the AP3D protocol.
    Eval(EvalArgs),
    /// Pairwise IoU matrix of two cuboid lists.
    Iou(IouArgs),
    /// Throughput of the IoU kernels on seeded random cuboids.
    Bench(BenchArgs),
    /// Histograms and correlations of a dataset's object layout.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth dataset JSON.
    pub gt: PathBuf,
    /// Predictions JSON.
    pub pred: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub tau_min: f64,
    #[arg(long, default_value_t = 0.50)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tau_step: f64,
    /// Depth cutoffs NEAR,FAR in meters: near is (0, NEAR], medium
    /// (NEAR, FAR], far beyond FAR.
    #[arg(long, value_delimiter = ',', value_name = "NEAR,FAR")]
    pub bands: Option<Vec<f64>>,
    /// Print the report as JSON or CSV instead of the summary table.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Directory receiving ap_report.json and ap_report.csv.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl EvalArgs {
    pub fn flags(&self) -> Result<EvalFlags, CliError> {
        let mut config = EvalConfig {
            thresholds: threshold_grid(self.tau_min, self.tau_max, self.tau_step)?,
            ..EvalConfig::default()
        };
        if let Some(b) = &self.bands {
            let [near, far] = b[..] else {
                return Err(CliError::Usage(format!("--bands takes two cutoffs NEAR,FAR, got {b:?}")));
            };
            config.bands = DepthBands { near, far };
        }
        config.validate()?;
        Ok(EvalFlags { config })
    }
}

#[derive(Debug, Args)]
pub struct IouArgs {
    /// JSON array of cuboids, one matrix row each.
    pub boxes_a: PathBuf,
    /// JSON array of cuboids, one matrix column each.
    pub boxes_b: PathBuf,
    /// Use the ground-plane approximation instead of the exact kernel.
    #[arg(long)]
    pub approx: bool,
    /// Append Monte-Carlo estimates with this many samples per pair. The
    /// output switches to one line per pair.
    #[arg(long, value_name = "N")]
    pub oracle: Option<u64>,
    /// Seed of the Monte-Carlo oracle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl IouArgs {
    pub fn flags(&self) -> IouFlags {
        IouFlags {
            approx: self.approx,
            oracle: self.oracle,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Pairs in the benchmark batch, rounded up to a square matrix.
    #[arg(long, default_value_t = 16384)]
    pub n_pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples per pair for the oracle timing.
    #[arg(long, default_value_t = 10_000)]
    pub oracle_samples: u64,
    /// Pairs timed with the oracle.
    #[arg(long, default_value_t = 64)]
    pub oracle_pairs: usize,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl BenchArgs {
    pub fn flags(&self, threads: Option<usize>) -> BenchFlags {
        BenchFlags {
            n_pairs: self.n_pairs,
            threads: threads.unwrap_or_else(|| {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            }),
            seed: self.seed,
            oracle_samples: self.oracle_samples,
            oracle_pairs: self.oracle_pairs,
        }
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset JSON.
    pub dataset: PathBuf,
    /// Depth range of the top-view histogram, meters.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub depth_range: Option<Vec<f64>>,
    /// Lateral range of the top-view histogram, meters.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub lateral_range: Option<Vec<f64>>,
    /// Bins per axis of the 2D histograms.
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
    /// Print the report as JSON or the histograms as CSV instead of the
    /// summary line.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Directory receiving stats.json and one CSV per histogram.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl StatsArgs {
    pub fn flags(&self) -> StatsFlags {
        let mut config = cuboid3d::dataset::StatsConfig {
            center_bins: self.bins,
            topview_bins: self.bins,
            ..Default::default()
        };
        if let Some(r) = &self.depth_range {
            config.depth_range = (r[0], r[1]);
        }
        if let Some(r) = &self.lateral_range {
            config.lateral_range = (r[0], r[1]);
        }
        StatsFlags { config }
    }
}
