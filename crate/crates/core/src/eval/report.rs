use std::fmt::Write as _;

use serde::Serialize;

use super::{Band, DepthBands};

/// Shortest decimal representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandReport {
    pub band: Band,
    /// Non-ignored ground truth in the band.
    pub num_gt: usize,
    /// Ground truth ignored by the rules or outside the band.
    pub num_ignored: usize,
    pub num_pred: usize,
    /// AP at each threshold; `None` when the band has no ground truth.
    pub ap: Vec<Option<f64>>,
    /// True positives at each threshold.
    pub tp: Vec<usize>,
    /// Mean over thresholds.
    pub mean_ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryReport {
    pub name: String,
    pub bands: Vec<BandReport>,
}

impl CategoryReport {
    pub fn band(&self, band: Band) -> &BandReport {
        self.bands
            .iter()
            .find(|b| b.band == band)
            .expect("every band is reported")
    }
}

/// Category means. A category without ground truth in a band does not take
/// part in that band's mean; a mean over no categories is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub ap3d: Option<f64>,
    pub ap3d_25: Option<f64>,
    pub ap3d_50: Option<f64>,
    pub ap3d_near: Option<f64>,
    pub ap3d_medium: Option<f64>,
    pub ap3d_far: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct APReport {
    pub thresholds: Vec<f64>,
    pub bands: DepthBands,
    pub categories: Vec<CategoryReport>,
    pub summary: Summary,
    pub num_gt: usize,
    pub num_pred: usize,
    pub dropped_predictions: usize,
}

pub const CSV_HEADER: &str = "category,band,tau,ap,num_gt,num_ignored,num_pred,num_tp";

impl APReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per category, band and threshold. Missing APs are empty
    /// fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.categories {
            for b in &c.bands {
                for (t, tau) in self.thresholds.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        c.name,
                        b.band.name(),
                        format_float(*tau),
                        format_opt(b.ap[t]),
                        b.num_gt,
                        b.num_ignored,
                        b.num_pred,
                        b.tp[t]
                    );
                }
            }
        }
        out
    }

    /// Human-readable summary table with percentages.
    pub fn table(&self) -> String {
        let pct = |v: Option<f64>| match v {
            Some(x) => format!("{:>8.2}", 100.0 * x),
            None => format!("{:>8}", "-"),
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}",
            "category", "AP3D", "AP25", "AP50", "near", "med", "far"
        );
        let ap_at = |c: &CategoryReport, tau: f64| {
            self.thresholds
                .iter()
                .position(|&t| (t - tau).abs() < 1e-9)
                .and_then(|i| c.band(Band::All).ap[i])
        };
        for c in &self.categories {
            let _ = writeln!(
                out,
                "{:<20}{}{}{}{}{}{}",
                c.name,
                pct(c.band(Band::All).mean_ap),
                pct(ap_at(c, 0.25)),
                pct(ap_at(c, 0.5)),
                pct(c.band(Band::Near).mean_ap),
                pct(c.band(Band::Medium).mean_ap),
                pct(c.band(Band::Far).mean_ap),
            );
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "{:<20}{}{}{}{}{}{}",
            "mean",
            pct(s.ap3d),
            pct(s.ap3d_25),
            pct(s.ap3d_50),
            pct(s.ap3d_near),
            pct(s.ap3d_medium),
            pct(s.ap3d_far),
        );
        out
    }
}
