use std::fmt::Write as _;
use std::hash::{DefaultHasher, Hasher};
use std::path::Path;
use std::time::Instant;

use cuboid3d::dataset::{load_cuboids, stats, Dataset, Predictions, StatsConfig, StatsReport};
use cuboid3d::eval::{evaluate, format_float, APReport, EvalConfig};
use cuboid3d::intersect::{approx_batched, iou3d_batched, mc_iou_oracle, with_threads, IoUMatrix};
use cuboid3d::sampling::BoxDistribution;
use cuboid3d::Cuboid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct EvalFlags {
    pub config: EvalConfig,
}

#[derive(Debug, Clone)]
pub struct EvalArtifacts {
    pub report: APReport,
    pub json: String,
    pub csv: String,
    pub table: String,
}

pub fn cmd_eval(gt_path: &Path, pred_path: &Path, flags: &EvalFlags) -> Result<EvalArtifacts, CliError> {
    let dataset = Dataset::load(gt_path)?;
    let preds = Predictions::load(pred_path)?;
    let report = evaluate(&preds.records, &dataset.gt_records(), &dataset.category_names(), &flags.config)?;
    let mut json = report.to_json();
    json.push('\n');
    Ok(EvalArtifacts {
        csv: report.to_csv(),
        table: report.table(),
        json,
        report,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IouFlags {
    pub approx: bool,
    /// Monte-Carlo samples per pair; switches to the long format.
    pub oracle: Option<u64>,
    pub seed: u64,
}

/// Header of the long format written when the oracle is requested.
pub const ORACLE_HEADER: &str = "pair,iou,oracle,oracle_stderr";

/// Oracle seed of the `k`-th pair in row-major order.
pub fn pair_seed(seed: u64, k: usize) -> u64 {
    seed.rotate_left(32) ^ k as u64
}

/// Without the oracle: one CSV line per box of `a`, one column per box of
/// `b`. With it: one line `i:j,iou,estimate,stderr` per pair.
pub fn cmd_iou(a_path: &Path, b_path: &Path, flags: &IouFlags) -> Result<String, CliError> {
    let a = load_cuboids(a_path)?;
    let b = load_cuboids(b_path)?;
    let m = if flags.approx { approx_batched(&a, &b) } else { iou3d_batched(&a, &b) };
    let mut out = String::new();
    match flags.oracle {
        None => {
            for r in 0..m.rows() {
                let line: Vec<String> = m.row(r).iter().map(|&v| format_float(v)).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
        }
        Some(samples) => {
            if samples == 0 {
                return Err(CliError::Usage("--oracle needs at least one sample".into()));
            }
            let cols = m.cols();
            let estimates: Vec<_> = (0..m.values().len())
                .into_par_iter()
                .map(|k| mc_iou_oracle(&a[k / cols], &b[k % cols], samples, pair_seed(flags.seed, k)))
                .collect();
            out.push_str(ORACLE_HEADER);
            out.push('\n');
            for (k, est) in estimates.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{}:{},{},{},{}",
                    k / cols,
                    k % cols,
                    format_float(m.values()[k]),
                    format_float(est.estimate),
                    format_float(est.stderr)
                );
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct BenchFlags {
    pub n_pairs: usize,
    pub threads: usize,
    pub seed: u64,
    pub oracle_samples: u64,
    pub oracle_pairs: usize,
}

impl Default for BenchFlags {
    fn default() -> Self {
        Self {
            n_pairs: 16384,
            threads: 1,
            seed: 0,
            oracle_samples: 10_000,
            oracle_pairs: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub pairs: usize,
    pub seconds: f64,
    pub pairs_per_sec: f64,
}

impl Timing {
    fn measure<T>(pairs: usize, f: impl FnOnce() -> T) -> (T, Timing) {
        let start = Instant::now();
        let out = f();
        let seconds = start.elapsed().as_secs_f64();
        let pairs_per_sec = if seconds > 0.0 { pairs as f64 / seconds } else { f64::INFINITY };
        (out, Timing { pairs, seconds, pairs_per_sec })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: usize,
    pub cols: usize,
    pub threads: usize,
    pub seed: u64,
    pub exact_single: Timing,
    pub exact_parallel: Timing,
    pub approx: Timing,
    pub oracle: Timing,
    pub oracle_samples: u64,
    /// Single-thread over parallel wall time of the exact kernel.
    pub speedup: f64,
    /// Exact matrices from one and from `threads` workers agree bit for bit.
    pub identical_across_threads: bool,
    /// Hash of the exact matrix's bit patterns.
    pub checksum: String,
}

/// Seeded random boxes forming a square `side × side` batch with at least
/// `n_pairs` pairs.
pub fn bench_inputs(n_pairs: usize, seed: u64) -> (Vec<Cuboid>, Vec<Cuboid>) {
    let side = (n_pairs as f64).sqrt().ceil() as usize;
    let dist = BoxDistribution::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (0..side).map(|_| dist.sample(&mut rng)).collect();
    let b = (0..side).map(|_| dist.sample(&mut rng)).collect();
    (a, b)
}

pub fn matrix_checksum(m: &IoUMatrix) -> u64 {
    let mut h = DefaultHasher::new();
    for v in m.values() {
        h.write_u64(v.to_bits());
    }
    h.finish()
}

pub fn cmd_bench(flags: &BenchFlags) -> Result<BenchReport, CliError> {
    if flags.n_pairs == 0 || flags.threads == 0 {
        return Err(CliError::Usage("bench needs at least one pair and one thread".into()));
    }
    let (a, b) = bench_inputs(flags.n_pairs, flags.seed);
    let pairs = a.len() * b.len();
    let t = flags.threads;

    let (single, exact_single) = with_threads(1, || Timing::measure(pairs, || iou3d_batched(&a, &b)))?;
    let (parallel, exact_parallel) = with_threads(t, || Timing::measure(pairs, || iou3d_batched(&a, &b)))?;
    let (_, approx) = with_threads(t, || Timing::measure(pairs, || approx_batched(&a, &b)))?;

    let oracle_pairs = flags.oracle_pairs.min(pairs);
    let cols = b.len();
    let (_, oracle) = with_threads(t, || {
        Timing::measure(oracle_pairs, || {
            (0..oracle_pairs)
                .into_par_iter()
                .map(|k| mc_iou_oracle(&a[k / cols], &b[k % cols], flags.oracle_samples, pair_seed(flags.seed, k)))
                .collect::<Vec<_>>()
        })
    })?;

    let identical = single
        .values()
        .iter()
        .zip(parallel.values())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    Ok(BenchReport {
        rows: a.len(),
        cols: b.len(),
        threads: t,
        seed: flags.seed,
        speedup: exact_single.seconds / exact_parallel.seconds,
        exact_single,
        exact_parallel,
        approx,
        oracle,
        oracle_samples: flags.oracle_samples,
        identical_across_threads: identical,
        checksum: format!("{:016x}", matrix_checksum(&single)),
    })
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bench report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kernel,threads,pairs,seconds,pairs_per_sec\n");
        for (name, threads, t) in self.timings() {
            let _ = writeln!(
                out,
                "{name},{threads},{},{},{}",
                t.pairs,
                format_float(t.seconds),
                format_float(t.pairs_per_sec)
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}x{} boxes, seed {}\n", self.rows, self.cols, self.seed);
        for (name, threads, t) in self.timings() {
            let _ = writeln!(
                out,
                "{name:<8} threads={threads:<3} pairs={:<7} {:>10.4} s {:>14.0} pairs/s",
                t.pairs, t.seconds, t.pairs_per_sec
            );
        }
        let _ = writeln!(out, "speedup {:.2}x, identical across threads: {}", self.speedup, self.identical_across_threads);
        let _ = writeln!(out, "checksum {}", self.checksum);
        out
    }

    fn timings(&self) -> [(&'static str, usize, Timing); 4] {
        [
            ("exact", 1, self.exact_single),
            ("exact", self.threads, self.exact_parallel),
            ("approx", self.threads, self.approx),
            ("oracle", self.threads, self.oracle),
        ]
    }
}

#[derive(Debug, Clone, Default)]
pub struct StatsFlags {
    pub config: StatsConfig,
}

#[derive(Debug, Clone)]
pub struct StatsArtifacts {
    pub report: StatsReport,
    pub json: String,
    /// `(file stem, contents)` per histogram.
    pub csvs: Vec<(&'static str, String)>,
    pub summary: String,
}

pub fn cmd_stats(path: &Path, flags: &StatsFlags) -> Result<StatsArtifacts, CliError> {
    let dataset = Dataset::load(path)?;
    let report = stats(&dataset, &flags.config)?;
    let mut json = report.to_json();
    json.push('\n');
    let corr = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    let summary = format!(
        "annotations {}, corr(center row, depth) {}, corr(relative size, depth) {}",
        report.num_annotations,
        corr(report.correlations.y_vs_depth),
        corr(report.correlations.size_vs_depth)
    );
    Ok(StatsArtifacts {
        csvs: vec![
            ("center_histogram", report.center_histogram.to_csv()),
            ("topview_histogram", report.topview_histogram.to_csv()),
            ("relative_size_histogram", report.relative_size_histogram.to_csv()),
        ],
        json,
        summary,
        report,
    })
}
