//! Annotation, prediction and cuboid-list files.
//!
//! All files are UTF-8 JSON with snake_case keys. Rotations are row-major
//! 9-element arrays mapping object to camera coordinates, 2D boxes are
//! `[x, y, w, h]` in pixels, and 3D quantities are in camera-space meters
//! (+x right, +y down, +z forward). Unknown keys are rejected.
//!
//! A rotation that drifts from orthonormal by more than 1e-9 but at most
//! 1e-3 is replaced by its nearest rotation (polar decomposition); drift
//! above 1e-6 is reported as a warning. Larger drift is an error.

mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::SVD;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::eval::{GtRecord, ImageId, PredRecord};
use crate::geometry::{orthonormality_error, score_fusion, CategoryPriors, Cuboid, ROTATION_TOL};
use crate::{Mat3, Vec3};

pub use stats::{
    correlations, pearson, stats, Correlations, Histogram1D, Histogram2D, StatsConfig, StatsReport,
};

/// Drift up to this is repaired silently.
pub const ROTATION_WARN_TOL: f64 = 1e-6;
/// Drift above this is rejected.
pub const ROTATION_REPAIR_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsEntry {
    pub fx: f64,
    pub fy: f64,
    pub px: f64,
    pub py: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    pub id: ImageId,
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<IntrinsicsEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryEntry {
    pub name: String,
    /// Mean `(w, h, l)` in meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub image_id: ImageId,
    pub category: String,
    pub bbox2d: [f64; 4],
    pub center: [f64; 3],
    pub rotation: [f64; 9],
    pub dims: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occlusion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub images: Vec<ImageEntry>,
    #[serde(default)]
    pub categories: Vec<CategoryEntry>,
    pub annotations: Vec<AnnotationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionEntry {
    pub image_id: ImageId,
    pub category: String,
    pub center: [f64; 3],
    pub rotation: [f64; 9],
    pub dims: [f64; 3],
    /// Classification score in `[0, 1]`.
    pub score: f64,
    /// Optional 3D uncertainty; when present the score used for ranking is
    /// `sqrt(score * exp(-mu))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFile {
    pub predictions: Vec<PredictionEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuboidEntry {
    pub center: [f64; 3],
    pub dims: [f64; 3],
    pub rotation: [f64; 9],
}

impl CuboidEntry {
    pub fn from_cuboid(c: &Cuboid) -> Self {
        let r = c.rotation();
        Self {
            center: [c.center().x, c.center().y, c.center().z],
            dims: [c.dims().x, c.dims().y, c.dims().z],
            rotation: std::array::from_fn(|i| r[(i / 3, i % 3)]),
        }
    }
}

/// Nearest proper rotation to `m` in the Frobenius norm.
pub fn nearest_rotation(m: &Mat3) -> Result<Mat3> {
    let svd = SVD::new(*m, true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Geometry("SVD failed".into())),
    };
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u = u;
        let mut col = u.column_mut(2);
        col *= -1.0;
        r = u * vt;
    }
    Ok(r)
}

/// Checks a rotation read from a file, repairing small drift.
/// `what` names the record in diagnostics.
fn checked_rotation(values: &[f64; 9], what: &str, warnings: &mut Vec<String>) -> Result<Mat3> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Geometry(format!("{what}: non-finite rotation")));
    }
    let m = Mat3::from_row_slice(values);
    let err = orthonormality_error(&m);
    if err <= ROTATION_TOL {
        return Ok(m);
    }
    if err > ROTATION_REPAIR_TOL || m.determinant() <= 0.0 {
        return Err(Error::Geometry(format!(
            "{what}: rotation is not orthonormal (error {err:.3e}, limit {ROTATION_REPAIR_TOL:e})"
        )));
    }
    if err > ROTATION_WARN_TOL {
        warnings.push(format!(
            "{what}: rotation re-orthonormalized (error {err:.3e})"
        ));
    }
    nearest_rotation(&m)
}

fn checked_cuboid(
    center: &[f64; 3],
    dims: &[f64; 3],
    rotation: &[f64; 9],
    what: &str,
    warnings: &mut Vec<String>,
) -> Result<(Cuboid, [f64; 9])> {
    let r = checked_rotation(rotation, what, warnings)?;
    let c = Cuboid::new(Vec3::from(*center), Vec3::from(*dims), r)
        .map_err(|e| Error::Geometry(format!("{what}: {e}")))?;
    Ok((c, std::array::from_fn(|i| r[(i / 3, i % 3)])))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_json(&text, &path.display().to_string())
}

fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Schema(format!("{origin}: {e}")))
}

fn check_fraction(v: Option<f64>, what: &str) -> Result<()> {
    match v {
        Some(x) if !(0.0..=1.0).contains(&x) => {
            Err(Error::Schema(format!("{what} {x} outside [0, 1]")))
        }
        _ => Ok(()),
    }
}

/// A validated annotation file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    file: DatasetFile,
    cuboids: Vec<Cuboid>,
    intrinsics: BTreeMap<ImageId, Intrinsics>,
    warnings: Vec<String>,
}

impl Dataset {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_file(read_json(path.as_ref())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(parse_json(text, "<input>")?)
    }

    /// Validates `file`, repairing slightly drifted rotations in place.
    pub fn from_file(mut file: DatasetFile) -> Result<Self> {
        let mut warnings = Vec::new();
        let mut intrinsics = BTreeMap::new();
        for img in &file.images {
            let what = format!("image {}", img.id);
            if !(img.width > 0.0 && img.height > 0.0) {
                return Err(Error::Schema(format!("{what}: image size must be positive")));
            }
            let k = match img.intrinsics {
                Some(k) => Intrinsics::new(k.fx, k.fy, k.px, k.py, img.width, img.height),
                None => Intrinsics::estimated_from_image(img.width, img.height),
            }
            .map_err(|e| Error::Schema(format!("{what}: {e}")))?;
            if intrinsics.insert(img.id, k).is_some() {
                return Err(Error::Schema(format!("{what}: duplicate image id")));
            }
        }

        let mut names = BTreeSet::new();
        for c in &file.categories {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("category '{}' listed twice", c.name)));
            }
            if let Some(p) = c.priors {
                if p.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                    return Err(Error::Schema(format!(
                        "category '{}': priors must be positive",
                        c.name
                    )));
                }
            }
        }

        let mut cuboids = Vec::with_capacity(file.annotations.len());
        for (i, ann) in file.annotations.iter_mut().enumerate() {
            let what = match ann.id {
                Some(id) => format!("annotation #{i} (id {id})"),
                None => format!("annotation #{i}"),
            };
            if !intrinsics.contains_key(&ann.image_id) {
                return Err(Error::Referential(format!(
                    "{what} references missing image id {}",
                    ann.image_id
                )));
            }
            let [_, _, w, h] = ann.bbox2d;
            if ann.bbox2d.iter().any(|v| !v.is_finite()) || w < 0.0 || h < 0.0 {
                return Err(Error::Schema(format!("{what}: invalid bbox2d {:?}", ann.bbox2d)));
            }
            check_fraction(ann.occlusion, &format!("{what}: occlusion"))?;
            check_fraction(ann.truncation, &format!("{what}: truncation"))?;
            let (cuboid, rotation) =
                checked_cuboid(&ann.center, &ann.dims, &ann.rotation, &what, &mut warnings)?;
            ann.rotation = rotation;
            cuboids.push(cuboid);
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(Self {
            file,
            cuboids,
            intrinsics,
            warnings,
        })
    }

    pub fn file(&self) -> &DatasetFile {
        &self.file
    }

    pub fn images(&self) -> &[ImageEntry] {
        &self.file.images
    }

    pub fn annotations(&self) -> &[AnnotationEntry] {
        &self.file.annotations
    }

    /// The cuboid of each annotation, in annotation order.
    pub fn cuboids(&self) -> &[Cuboid] {
        &self.cuboids
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Intrinsics of an image; estimated from the image size when the file
    /// does not provide them.
    pub fn intrinsics(&self, image: ImageId) -> Option<&Intrinsics> {
        self.intrinsics.get(&image)
    }

    pub fn category_names(&self) -> Vec<String> {
        self.file.categories.iter().map(|c| c.name.clone()).collect()
    }

    pub fn priors(&self) -> CategoryPriors {
        let mut p = CategoryPriors::new();
        for c in &self.file.categories {
            if let Some(d) = c.priors {
                p.insert(c.name.clone(), d).expect("validated at load");
            }
        }
        p
    }

    pub fn gt_records(&self) -> Vec<GtRecord> {
        self.file
            .annotations
            .iter()
            .zip(&self.cuboids)
            .map(|(a, c)| GtRecord {
                image_id: a.image_id,
                category: a.category.clone(),
                cuboid: *c,
                bbox2d: a.bbox2d,
                image_height: self.intrinsics[&a.image_id].height(),
                occlusion: a.occlusion,
                truncation: a.truncation,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("dataset serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Loaded predictions plus any repair warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub records: Vec<PredRecord>,
    pub warnings: Vec<String>,
}

impl Predictions {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_file(read_json(path.as_ref())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(parse_json(text, "<input>")?)
    }

    pub fn from_file(file: PredictionFile) -> Result<Self> {
        let mut warnings = Vec::new();
        let mut records = Vec::with_capacity(file.predictions.len());
        for (i, p) in file.predictions.iter().enumerate() {
            let what = format!("prediction #{i}");
            if !(0.0..=1.0).contains(&p.score) {
                return Err(Error::Schema(format!("{what}: score {} outside [0, 1]", p.score)));
            }
            if p.mu.is_some_and(|m| !m.is_finite()) {
                return Err(Error::Schema(format!("{what}: non-finite mu")));
            }
            let (cuboid, _) = checked_cuboid(&p.center, &p.dims, &p.rotation, &what, &mut warnings)?;
            let score = match p.mu {
                Some(mu) => score_fusion(p.score, mu).min(1.0),
                None => p.score,
            };
            records.push(PredRecord {
                image_id: p.image_id,
                category: p.category.clone(),
                cuboid,
                score,
            });
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(Self { records, warnings })
    }
}

/// Reads a JSON array of cuboids.
pub fn load_cuboids(path: impl AsRef<Path>) -> Result<Vec<Cuboid>> {
    let entries: Vec<CuboidEntry> = read_json(path.as_ref())?;
    cuboids_from_entries(&entries)
}

pub fn cuboids_from_entries(entries: &[CuboidEntry]) -> Result<Vec<Cuboid>> {
    let mut warnings = Vec::new();
    let out = entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            checked_cuboid(&e.center, &e.dims, &e.rotation, &format!("box #{i}"), &mut warnings)
                .map(|(c, _)| c)
        })
        .collect::<Result<Vec<_>>>()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "images": [{"id": 1, "width": 640, "height": 480,
                    "intrinsics": {"fx": 500, "fy": 500, "px": 320, "py": 240}}],
        "categories": [{"name": "chair", "priors": [0.5, 0.9, 0.5]}],
        "annotations": [{"image_id": 1, "category": "chair", "bbox2d": [100, 100, 80, 120],
                         "center": [0.1, 0.2, 3.0], "rotation": [1,0,0, 0,1,0, 0,0,1],
                         "dims": [0.5, 0.9, 0.5]}]
    }"#;

    #[test]
    fn minimal_loads() {
        let ds = Dataset::from_json(MINIMAL).unwrap();
        assert_eq!((ds.images().len(), ds.annotations().len()), (1, 1));
        assert!(ds.warnings().is_empty());
        assert_eq!(ds.priors().get("chair").unwrap(), Vec3::new(0.5, 0.9, 0.5));
        let gts = ds.gt_records();
        assert_eq!(gts[0].image_height, 480.0);
        assert_eq!(gts[0].occlusion, None);
    }

    #[test]
    fn dangling_image_id() {
        let text = MINIMAL.replace(r#""image_id": 1"#, r#""image_id": 7"#);
        match Dataset::from_json(&text) {
            Err(Error::Referential(msg)) => assert!(msg.contains('7'), "{msg}"),
            other => panic!("expected referential error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_and_missing_fields() {
        let extra = MINIMAL.replace(r#""dims": [0.5, 0.9, 0.5]}"#, r#""dims": [0.5, 0.9, 0.5], "color": 3}"#);
        assert!(matches!(Dataset::from_json(&extra), Err(Error::Schema(_))));
        let missing = MINIMAL.replace(r#""bbox2d": [100, 100, 80, 120],"#, "");
        match Dataset::from_json(&missing) {
            Err(Error::Schema(msg)) => assert!(msg.contains("bbox2d") && msg.contains("line"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn badly_broken_rotation_is_rejected() {
        let text = MINIMAL.replace("[1,0,0, 0,1,0, 0,0,1]", "[1,0.1,0, 0,1,0, 0,0,1]");
        assert!(matches!(Dataset::from_json(&text), Err(Error::Geometry(_))));
        let reflect = MINIMAL.replace("[1,0,0, 0,1,0, 0,0,1]", "[1,0,0, 0,1,0, 0,0,-1]");
        assert!(matches!(Dataset::from_json(&reflect), Err(Error::Geometry(_))));
    }

    #[test]
    fn drifted_rotation_is_repaired() {
        let text = MINIMAL.replace("[1,0,0, 0,1,0, 0,0,1]", "[1,0.00001,0, 0,1,0, 0,0,1]");
        let ds = Dataset::from_json(&text).unwrap();
        assert_eq!(ds.warnings().len(), 1);
        let r = ds.cuboids()[0].rotation();
        assert!(orthonormality_error(r) < 1e-12);
        // Tiny drift is repaired without a warning.
        let text = MINIMAL.replace("[1,0,0, 0,1,0, 0,0,1]", "[1,0.0000001,0, 0,1,0, 0,0,1]");
        let ds = Dataset::from_json(&text).unwrap();
        assert!(ds.warnings().is_empty());
        assert!(orthonormality_error(ds.cuboids()[0].rotation()) < 1e-12);
    }

    #[test]
    fn missing_intrinsics_fall_back() {
        let text = MINIMAL.replace(
            r#",
                    "intrinsics": {"fx": 500, "fy": 500, "px": 320, "py": 240}"#,
            "",
        );
        let ds = Dataset::from_json(&text).unwrap();
        let k = ds.intrinsics(1).unwrap();
        assert!(k.is_estimated());
        assert_eq!(k.fy(), 960.0);
    }

    #[test]
    fn round_trip() {
        let text = MINIMAL.replace("[1,0,0, 0,1,0, 0,0,1]", "[1,0.00001,0, 0,1,0, 0,0,1]");
        let first = Dataset::from_json(&text).unwrap();
        let second = Dataset::from_json(&first.to_json()).unwrap();
        assert_eq!(first.file(), second.file());
        assert_eq!(first.cuboids(), second.cuboids());
    }

    #[test]
    fn predictions_fuse_scores() {
        let text = r#"{"predictions": [
            {"image_id": 1, "category": "chair", "center": [0, 0, 3], "rotation": [1,0,0,0,1,0,0,0,1],
             "dims": [1, 1, 1], "score": 0.81, "mu": 0.5},
            {"image_id": 1, "category": "chair", "center": [0, 0, 3], "rotation": [1,0,0,0,1,0,0,0,1],
             "dims": [1, 1, 1], "score": 0.5}
        ]}"#;
        let p = Predictions::from_json(text).unwrap();
        assert!((p.records[0].score - (0.81 * (-0.5f64).exp()).sqrt()).abs() < 1e-15);
        assert_eq!(p.records[1].score, 0.5);
        let bad = text.replace("0.81", "1.81");
        match Predictions::from_json(&bad) {
            Err(Error::Schema(msg)) => assert!(msg.contains("prediction #0"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nearest_rotation_of_rotation_is_itself() {
        let r = nalgebra::Rotation3::from_euler_angles(0.1, 0.2, 0.3).into_inner();
        let n = nearest_rotation(&r).unwrap();
        assert!((n - r).abs().max() < 1e-14);
    }
}
