//! Mean AP3D evaluation.
//!
//! Predictions are matched to ground truth per image and category with
//! greedy, score-ordered matching on exact 3D IoU. Ground truths that are
//! heavily occluded, truncated or tiny are ignored: they neither count
//! towards recall nor turn overlapping predictions into false positives.
//! AP uses 101-point interpolation and is averaged over the IoU threshold
//! grid, then over categories. Depth-band results restrict ground truth to
//! a band by treating out-of-band ground truth as ignored.

mod matching;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Cuboid;
use crate::intersect::iou3d_batched;

pub use matching::{average_precision, greedy_match, Outcome};
pub use report::{format_float, APReport, BandReport, CategoryReport, Summary};

pub type ImageId = u64;

/// One annotated object.
#[derive(Debug, Clone, PartialEq)]
pub struct GtRecord {
    pub image_id: ImageId,
    pub category: String,
    pub cuboid: Cuboid,
    /// `[x, y, w, h]` in pixels.
    pub bbox2d: [f64; 4],
    /// Height of the image the object was annotated in, pixels.
    pub image_height: f64,
    pub occlusion: Option<f64>,
    pub truncation: Option<f64>,
}

impl GtRecord {
    pub fn depth(&self) -> f64 {
        self.cuboid.center().z
    }
}

/// One detection. `score` is final, i.e. already fused with the 3D
/// uncertainty when the model predicts one.
#[derive(Debug, Clone, PartialEq)]
pub struct PredRecord {
    pub image_id: ImageId,
    pub category: String,
    pub cuboid: Cuboid,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    All,
    Near,
    Medium,
    Far,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::All, Band::Near, Band::Medium, Band::Far];

    pub fn name(&self) -> &'static str {
        match self {
            Band::All => "all",
            Band::Near => "near",
            Band::Medium => "medium",
            Band::Far => "far",
        }
    }
}

/// Depth cutoffs in meters: near `(0, near]`, medium `(near, far]`,
/// far `(far, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthBands {
    pub near: f64,
    pub far: f64,
}

impl Default for DepthBands {
    fn default() -> Self {
        Self {
            near: 10.0,
            far: 35.0,
        }
    }
}

impl DepthBands {
    pub fn contains(&self, band: Band, depth: f64) -> bool {
        match band {
            Band::All => true,
            Band::Near => depth > 0.0 && depth <= self.near,
            Band::Medium => depth > self.near && depth <= self.far,
            Band::Far => depth > self.far,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// IoU thresholds, strictly increasing in `(0, 1]`.
    pub thresholds: Vec<f64>,
    /// Ground truth with occlusion above this is ignored.
    pub max_occlusion: f64,
    /// Ground truth with truncation above this is ignored.
    pub max_truncation: f64,
    /// Ground truth whose 2D box is shorter than this fraction of the image
    /// height is ignored.
    pub min_height_fraction: f64,
    pub bands: DepthBands,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: threshold_grid(0.05, 0.50, 0.05).expect("default grid is valid"),
            max_occlusion: 0.66,
            max_truncation: 0.66,
            min_height_fraction: 0.0625,
            bands: DepthBands::default(),
        }
    }
}

/// `min, min + step, ..., max`, with each value rounded to 9 decimals so
/// that e.g. the third step of 0.05 prints as `0.15`.
pub fn threshold_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && min > 0.0 && max <= 1.0 && min <= max) {
        return Err(Error::InvalidInput(format!(
            "threshold grid needs 0 < min <= max <= 1 and step > 0 (got {min}, {max}, {step})"
        )));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| ((min + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        if t.is_empty() {
            return Err(Error::InvalidInput("no IoU thresholds".into()));
        }
        if t.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::InvalidInput(format!("thresholds must lie in (0, 1]: {t:?}")));
        }
        if t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!("thresholds must increase strictly: {t:?}")));
        }
        let b = &self.bands;
        if !(b.near > 0.0 && b.near < b.far && b.far.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "depth bands need 0 < near < far (got {}, {})",
                b.near, b.far
            )));
        }
        Ok(())
    }

    fn threshold_index(&self, tau: f64) -> Option<usize> {
        self.thresholds.iter().position(|&t| (t - tau).abs() < 1e-9)
    }
}

/// Lower-cased, whitespace-trimmed category name.
pub fn normalize_category(name: &str) -> String {
    name.trim().to_lowercase()
}

/// Whether a ground truth is ignored by the occlusion, truncation and size
/// rules. Missing occlusion or truncation counts as zero.
pub fn is_ignored(gt: &GtRecord, cfg: &EvalConfig) -> bool {
    gt.occlusion.unwrap_or(0.0) > cfg.max_occlusion
        || gt.truncation.unwrap_or(0.0) > cfg.max_truncation
        || gt.bbox2d[3] / gt.image_height < cfg.min_height_fraction
}

pub fn classify_ignores(gts: &[GtRecord], cfg: &EvalConfig) -> Vec<bool> {
    gts.iter().map(|g| is_ignored(g, cfg)).collect()
}

fn check_fraction(what: &str, v: Option<f64>, idx: usize) -> Result<()> {
    match v {
        Some(x) if !(0.0..=1.0).contains(&x) => Err(Error::Schema(format!(
            "ground truth #{idx}: {what} {x} outside [0, 1]"
        ))),
        _ => Ok(()),
    }
}

fn validate_records(preds: &[PredRecord], gts: &[GtRecord]) -> Result<()> {
    for (i, g) in gts.iter().enumerate() {
        check_fraction("occlusion", g.occlusion, i)?;
        check_fraction("truncation", g.truncation, i)?;
        if !(g.image_height > 0.0) {
            return Err(Error::Schema(format!("ground truth #{i}: image height must be positive")));
        }
        if g.bbox2d.iter().any(|v| !v.is_finite()) || g.bbox2d[3] < 0.0 || g.bbox2d[2] < 0.0 {
            return Err(Error::Schema(format!("ground truth #{i}: invalid 2D box {:?}", g.bbox2d)));
        }
    }
    for (i, p) in preds.iter().enumerate() {
        if !(0.0..=1.0).contains(&p.score) {
            return Err(Error::Schema(format!(
                "prediction #{i}: score {} outside [0, 1]",
                p.score
            )));
        }
    }
    Ok(())
}

/// Per-category accumulation: `(score, is_tp)` lists and counters for every
/// band and threshold.
struct CategoryAccumulator {
    ranked: Vec<Vec<Vec<(f64, bool)>>>,
    tps: Vec<Vec<usize>>,
    num_gt: Vec<usize>,
    num_ignored: Vec<usize>,
    num_pred: usize,
}

fn evaluate_category(
    preds: &[&PredRecord],
    gts: &[&GtRecord],
    cfg: &EvalConfig,
) -> CategoryAccumulator {
    let nt = cfg.thresholds.len();
    let nb = Band::ALL.len();
    let mut acc = CategoryAccumulator {
        ranked: vec![vec![Vec::new(); nt]; nb],
        tps: vec![vec![0; nt]; nb],
        num_gt: vec![0; nb],
        num_ignored: vec![0; nb],
        num_pred: preds.len(),
    };

    let mut by_image: BTreeMap<ImageId, (Vec<&PredRecord>, Vec<&GtRecord>)> = BTreeMap::new();
    for p in preds {
        by_image.entry(p.image_id).or_default().0.push(p);
    }
    for g in gts {
        by_image.entry(g.image_id).or_default().1.push(g);
    }

    for (img_preds, img_gts) in by_image.values_mut() {
        img_preds.sort_by(|a, b| b.score.total_cmp(&a.score));
        let pred_boxes: Vec<Cuboid> = img_preds.iter().map(|p| p.cuboid).collect();
        let gt_boxes: Vec<Cuboid> = img_gts.iter().map(|g| g.cuboid).collect();
        let ious = iou3d_batched(&pred_boxes, &gt_boxes);
        let base: Vec<bool> = img_gts.iter().map(|g| is_ignored(g, cfg)).collect();

        for (b, band) in Band::ALL.iter().enumerate() {
            let ignored: Vec<bool> = img_gts
                .iter()
                .zip(&base)
                .map(|(g, &ig)| ig || !cfg.bands.contains(*band, g.depth()))
                .collect();
            let kept = ignored.iter().filter(|&&ig| !ig).count();
            acc.num_gt[b] += kept;
            acc.num_ignored[b] += ignored.len() - kept;
            for (t, &tau) in cfg.thresholds.iter().enumerate() {
                for (p, outcome) in img_preds.iter().zip(greedy_match(&ious, &ignored, tau)) {
                    match outcome {
                        Outcome::TruePositive(_) => {
                            acc.tps[b][t] += 1;
                            acc.ranked[b][t].push((p.score, true));
                        }
                        Outcome::FalsePositive => acc.ranked[b][t].push((p.score, false)),
                        Outcome::Discarded => {}
                    }
                }
            }
        }
    }
    acc
}

fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.into_iter().flatten().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// Full AP3D evaluation.
///
/// `categories` lists known category names in addition to those present in
/// the ground truth. Predictions for any other category are dropped and
/// counted in the report.
pub fn evaluate(
    preds: &[PredRecord],
    gts: &[GtRecord],
    categories: &[String],
    cfg: &EvalConfig,
) -> Result<APReport> {
    cfg.validate()?;
    validate_records(preds, gts)?;

    let mut known: BTreeSet<String> = categories.iter().map(|c| normalize_category(c)).collect();
    known.extend(gts.iter().map(|g| normalize_category(&g.category)));

    let mut grouped: BTreeMap<String, (Vec<&PredRecord>, Vec<&GtRecord>)> =
        known.iter().map(|c| (c.clone(), Default::default())).collect();
    let mut dropped = 0usize;
    for p in preds {
        match grouped.get_mut(&normalize_category(&p.category)) {
            Some(entry) => entry.0.push(p),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} predictions with unknown categories");
    }
    for g in gts {
        grouped
            .get_mut(&normalize_category(&g.category))
            .expect("ground-truth categories are known")
            .1
            .push(g);
    }

    let groups: Vec<(&String, &(Vec<&PredRecord>, Vec<&GtRecord>))> = grouped.iter().collect();
    let accumulated: Vec<CategoryAccumulator> = groups
        .par_iter()
        .map(|(_, (p, g))| evaluate_category(p, g, cfg))
        .collect();

    let categories: Vec<CategoryReport> = groups
        .iter()
        .zip(accumulated)
        .map(|((name, _), acc)| {
            let bands = Band::ALL
                .iter()
                .enumerate()
                .map(|(b, band)| {
                    let ap: Vec<Option<f64>> = acc.ranked[b]
                        .iter()
                        .map(|r| average_precision(r, acc.num_gt[b]))
                        .collect();
                    BandReport {
                        band: *band,
                        num_gt: acc.num_gt[b],
                        num_ignored: acc.num_ignored[b],
                        num_pred: acc.num_pred,
                        tp: acc.tps[b].clone(),
                        mean_ap: mean(ap.iter().copied()),
                        ap,
                    }
                })
                .collect();
            CategoryReport {
                name: (*name).clone(),
                bands,
            }
        })
        .collect();

    let band_mean = |band: Band| mean(categories.iter().map(|c| c.band(band).mean_ap));
    let at_threshold = |tau: f64| {
        cfg.threshold_index(tau)
            .and_then(|t| mean(categories.iter().map(|c| c.band(Band::All).ap[t])))
    };
    let summary = Summary {
        ap3d: band_mean(Band::All),
        ap3d_25: at_threshold(0.25),
        ap3d_50: at_threshold(0.50),
        ap3d_near: band_mean(Band::Near),
        ap3d_medium: band_mean(Band::Medium),
        ap3d_far: band_mean(Band::Far),
    };

    Ok(APReport {
        thresholds: cfg.thresholds.clone(),
        bands: cfg.bands,
        categories,
        summary,
        num_gt: gts.len(),
        num_pred: preds.len(),
        dropped_predictions: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    fn cube(x: f64, z: f64) -> Cuboid {
        Cuboid::axis_aligned(Vec3::new(x, 0.0, z), Vec3::new(1.0, 1.0, 1.0)).unwrap()
    }

    fn gt(image_id: u64, category: &str, cuboid: Cuboid) -> GtRecord {
        GtRecord {
            image_id,
            category: category.into(),
            cuboid,
            bbox2d: [10.0, 10.0, 50.0, 100.0],
            image_height: 480.0,
            occlusion: None,
            truncation: None,
        }
    }

    fn pred(image_id: u64, category: &str, cuboid: Cuboid, score: f64) -> PredRecord {
        PredRecord {
            image_id,
            category: category.into(),
            cuboid,
            score,
        }
    }

    #[test]
    fn default_grid() {
        let cfg = EvalConfig::default();
        assert_eq!(
            cfg.thresholds,
            vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]
        );
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = EvalConfig::default();
        cfg.thresholds = vec![0.5, 0.25];
        assert!(cfg.validate().is_err());
        cfg.thresholds = vec![0.0, 0.5];
        assert!(cfg.validate().is_err());
        cfg = EvalConfig::default();
        cfg.bands = DepthBands { near: 40.0, far: 35.0 };
        assert!(cfg.validate().is_err());
        assert!(threshold_grid(0.5, 0.2, 0.1).is_err());
    }

    #[test]
    fn ignore_rules() {
        let cfg = EvalConfig::default();
        let base = gt(1, "car", cube(0.0, 5.0));
        assert!(is_ignored(&GtRecord { occlusion: Some(0.7), ..base.clone() }, &cfg));
        assert!(is_ignored(&GtRecord { truncation: Some(0.67), ..base.clone() }, &cfg));
        assert!(!is_ignored(&GtRecord { occlusion: Some(0.66), ..base.clone() }, &cfg));
        let kept = GtRecord {
            occlusion: Some(0.0),
            truncation: Some(0.0),
            bbox2d: [0.0, 0.0, 10.0, 48.0],
            ..base.clone()
        };
        assert!(!is_ignored(&kept, &cfg));
        let boundary = GtRecord {
            bbox2d: [0.0, 0.0, 10.0, 30.0],
            ..base.clone()
        };
        assert_eq!(30.0 / 480.0, 0.0625);
        assert!(!is_ignored(&boundary, &cfg));
        let tiny = GtRecord {
            bbox2d: [0.0, 0.0, 10.0, 29.9],
            ..base
        };
        assert!(is_ignored(&tiny, &cfg));
    }

    #[test]
    fn perfect_detector() {
        let gts = vec![
            gt(1, "car", cube(0.0, 5.0)),
            gt(1, "car", cube(3.0, 20.0)),
            gt(2, "chair", cube(-1.0, 50.0)),
        ];
        let preds: Vec<PredRecord> = gts
            .iter()
            .map(|g| pred(g.image_id, &g.category, g.cuboid, 1.0))
            .collect();
        let r = evaluate(&preds, &gts, &[], &EvalConfig::default()).unwrap();
        assert_eq!(r.summary.ap3d, Some(1.0));
        assert_eq!(r.summary.ap3d_25, Some(1.0));
        assert_eq!(r.summary.ap3d_50, Some(1.0));
        assert_eq!(r.summary.ap3d_near, Some(1.0));
        assert_eq!(r.summary.ap3d_medium, Some(1.0));
        assert_eq!(r.summary.ap3d_far, Some(1.0));
    }

    #[test]
    fn empty_predictions() {
        let gts = vec![gt(1, "car", cube(0.0, 5.0)), gt(2, "lamp", cube(0.0, 12.0))];
        let r = evaluate(&[], &gts, &[], &EvalConfig::default()).unwrap();
        assert_eq!(r.summary.ap3d, Some(0.0));
        assert_eq!(r.num_gt, 2);
        for c in &r.categories {
            assert!(c.band(Band::All).ap.iter().all(|a| *a == Some(0.0)));
        }
    }

    #[test]
    fn empty_bands_are_null() {
        let gts = vec![gt(1, "car", cube(0.0, 5.0))];
        let preds = vec![pred(1, "car", cube(0.0, 5.0), 0.9)];
        let r = evaluate(&preds, &gts, &[], &EvalConfig::default()).unwrap();
        assert_eq!(r.summary.ap3d_near, Some(1.0));
        assert_eq!(r.summary.ap3d_medium, None);
        assert_eq!(r.summary.ap3d_far, None);
        let far = r.categories[0].band(Band::Far);
        assert_eq!(far.num_gt, 0);
        assert!(far.ap.iter().all(Option::is_none));
    }

    #[test]
    fn unknown_categories_are_dropped_and_names_normalized() {
        let gts = vec![gt(1, "Car ", cube(0.0, 5.0))];
        let preds = vec![
            pred(1, " car", cube(0.0, 5.0), 0.9),
            pred(1, "bicycle", cube(0.0, 5.0), 0.9),
        ];
        let r = evaluate(&preds, &gts, &[], &EvalConfig::default()).unwrap();
        assert_eq!(r.dropped_predictions, 1);
        assert_eq!(r.categories.len(), 1);
        assert_eq!(r.categories[0].name, "car");
        assert_eq!(r.summary.ap3d, Some(1.0));
    }

    #[test]
    fn listed_category_without_gt_is_excluded_from_mean() {
        let gts = vec![gt(1, "car", cube(0.0, 5.0))];
        let preds = vec![
            pred(1, "car", cube(0.0, 5.0), 0.9),
            pred(1, "sofa", cube(0.0, 5.0), 0.9),
        ];
        let r = evaluate(&preds, &gts, &["sofa".to_string()], &EvalConfig::default()).unwrap();
        assert_eq!(r.dropped_predictions, 0);
        assert_eq!(r.categories.len(), 2);
        assert_eq!(r.summary.ap3d, Some(1.0));
    }

    #[test]
    fn schema_errors() {
        let gts = vec![GtRecord {
            occlusion: Some(1.5),
            ..gt(1, "car", cube(0.0, 5.0))
        }];
        assert!(matches!(
            evaluate(&[], &gts, &[], &EvalConfig::default()),
            Err(Error::Schema(_))
        ));
        let preds = vec![pred(1, "car", cube(0.0, 5.0), 1.2)];
        assert!(matches!(
            evaluate(&preds, &[], &[], &EvalConfig::default()),
            Err(Error::Schema(_))
        ));
    }
}
