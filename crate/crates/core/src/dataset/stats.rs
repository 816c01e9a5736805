//! Layout statistics: where object centers project, how deep they are,
//! how large they appear, and how those quantities correlate.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::eval::format_float;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    /// Bins per axis of the projected-center histogram over `[0, 1]²`.
    pub center_bins: usize,
    /// Depth range of the top-view histogram, meters.
    pub depth_range: (f64, f64),
    /// Lateral range of the top-view histogram, meters.
    pub lateral_range: (f64, f64),
    /// Bins per axis of the top-view histogram.
    pub topview_bins: usize,
    /// Bins of the relative-size histogram over `[0, 1]`.
    pub size_bins: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            center_bins: 64,
            depth_range: (0.0, 20.0),
            lateral_range: (-10.0, 10.0),
            topview_bins: 64,
            size_bins: 50,
        }
    }
}

impl StatsConfig {
    pub fn validate(&self) -> Result<()> {
        let ok_range = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if self.center_bins == 0 || self.topview_bins == 0 || self.size_bins == 0 {
            return Err(Error::InvalidInput("histogram bin counts must be positive".into()));
        }
        if !ok_range(self.depth_range) || !ok_range(self.lateral_range) {
            return Err(Error::InvalidInput("histogram ranges need lo < hi".into()));
        }
        Ok(())
    }
}

/// Bin of `v` in `[lo, hi]` split into `n` bins; the upper edge belongs to
/// the last bin.
fn bin(v: f64, lo: f64, hi: f64, n: usize) -> Option<usize> {
    if !(v >= lo && v <= hi) {
        return None;
    }
    Some((((v - lo) / (hi - lo) * n as f64) as usize).min(n - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram1D {
    pub range: (f64, f64),
    pub counts: Vec<u64>,
    pub out_of_range: u64,
}

impl Histogram1D {
    fn new(range: (f64, f64), bins: usize) -> Self {
        Self {
            range,
            counts: vec![0; bins],
            out_of_range: 0,
        }
    }

    fn add(&mut self, v: f64) {
        match bin(v, self.range.0, self.range.1, self.counts.len()) {
            Some(i) => self.counts[i] += 1,
            None => self.out_of_range += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,lo,hi,count\n");
        let n = self.counts.len();
        let width = (self.range.1 - self.range.0) / n as f64;
        for (i, c) in self.counts.iter().enumerate() {
            let lo = self.range.0 + i as f64 * width;
            let _ = writeln!(out, "{i},{},{},{c}", format_float(lo), format_float(lo + width));
        }
        out
    }
}

/// Row-major 2D histogram. Rows follow the second coordinate, columns the
/// first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    pub col_range: (f64, f64),
    pub row_range: (f64, f64),
    pub counts: Vec<Vec<u64>>,
    pub out_of_range: u64,
}

impl Histogram2D {
    fn new(col_range: (f64, f64), row_range: (f64, f64), bins: usize) -> Self {
        Self {
            col_range,
            row_range,
            counts: vec![vec![0; bins]; bins],
            out_of_range: 0,
        }
    }

    fn add(&mut self, col_value: f64, row_value: f64) {
        let rows = self.counts.len();
        let cols = self.counts[0].len();
        match (
            bin(col_value, self.col_range.0, self.col_range.1, cols),
            bin(row_value, self.row_range.0, self.row_range.1, rows),
        ) {
            (Some(c), Some(r)) => self.counts[r][c] += 1,
            _ => self.out_of_range += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Long format, one line per non-empty cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,count\n");
        for (r, row) in self.counts.iter().enumerate() {
            for (c, &n) in row.iter().enumerate() {
                if n > 0 {
                    let _ = writeln!(out, "{r},{c},{n}");
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    /// Normalized projected-center row vs depth.
    pub y_vs_depth: Option<f64>,
    /// Relative 2D size vs depth.
    pub size_vs_depth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub num_annotations: u64,
    /// Projected centers in normalized image coordinates; columns follow x,
    /// rows follow y. Centers outside the frame or behind the camera go to
    /// `out_of_range`.
    pub center_histogram: Histogram2D,
    /// Top view: columns follow lateral x, rows follow depth z.
    pub topview_histogram: Histogram2D,
    /// `sqrt(box area / image area)`.
    pub relative_size_histogram: Histogram1D,
    pub correlations: Correlations,
    pub category_counts: BTreeMap<String, u64>,
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

/// Per-annotation quantities.
#[derive(Debug, Clone, Copy)]
struct Sample {
    /// Projected center, normalized; `None` when behind the camera.
    center: Option<(f64, f64)>,
    x: f64,
    z: f64,
    rel_size: f64,
}

fn samples(ds: &Dataset) -> Vec<Sample> {
    ds.annotations()
        .par_iter()
        .zip(ds.cuboids().par_iter())
        .map(|(a, c)| {
            let k = ds.intrinsics(a.image_id).expect("validated at load");
            let p = c.center();
            let center = k.project(p).ok().map(|(x, y)| (x / k.width(), y / k.height()));
            let [_, _, w, h] = a.bbox2d;
            Sample {
                center,
                x: p.x,
                z: p.z,
                rel_size: (w * h / (k.width() * k.height())).sqrt(),
            }
        })
        .collect()
}

/// Pearson correlation; undefined for fewer than two samples or when either
/// variable is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("pearson: length mismatch".into()));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} samples, need at least 2")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::InsufficientData("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn correlations_of(samples: &[Sample]) -> (Result<f64>, Result<f64>) {
    let projected: Vec<&Sample> = samples.iter().filter(|s| s.center.is_some()).collect();
    let ys: Vec<f64> = projected.iter().map(|s| s.center.expect("filtered").1).collect();
    let zs: Vec<f64> = projected.iter().map(|s| s.z).collect();
    let sizes: Vec<f64> = samples.iter().map(|s| s.rel_size).collect();
    let all_z: Vec<f64> = samples.iter().map(|s| s.z).collect();
    (pearson(&ys, &zs), pearson(&sizes, &all_z))
}

/// `(corr(y_norm, z), corr(relative size, z))` over all annotations.
pub fn correlations(ds: &Dataset) -> Result<(f64, f64)> {
    let (a, b) = correlations_of(&samples(ds));
    Ok((
        a.map_err(|e| Error::InsufficientData(format!("y vs depth: {e}")))?,
        b.map_err(|e| Error::InsufficientData(format!("size vs depth: {e}")))?,
    ))
}

pub fn stats(ds: &Dataset, cfg: &StatsConfig) -> Result<StatsReport> {
    cfg.validate()?;
    let samples = samples(ds);

    let mut centers = Histogram2D::new((0.0, 1.0), (0.0, 1.0), cfg.center_bins);
    let mut topview = Histogram2D::new(cfg.lateral_range, cfg.depth_range, cfg.topview_bins);
    let mut sizes = Histogram1D::new((0.0, 1.0), cfg.size_bins);
    for s in &samples {
        match s.center {
            Some((x, y)) => centers.add(x, y),
            None => centers.out_of_range += 1,
        }
        topview.add(s.x, s.z);
        sizes.add(s.rel_size);
    }

    let mut category_counts = BTreeMap::new();
    for a in ds.annotations() {
        *category_counts.entry(a.category.clone()).or_insert(0) += 1;
    }

    let (y_vs_depth, size_vs_depth) = correlations_of(&samples);
    Ok(StatsReport {
        num_annotations: samples.len() as u64,
        center_histogram: centers,
        topview_histogram: topview,
        relative_size_histogram: sizes,
        correlations: Correlations {
            y_vs_depth: y_vs_depth.ok(),
            size_vs_depth: size_vs_depth.ok(),
        },
        category_counts,
    })
}
