//! Oriented cuboids and the cube-head parameterization.
//!
//! Camera coordinates follow the usual vision convention: +x right, +y down,
//! +z forward. A cuboid is `R * diag(w, h, l) * B_unit + X`, where `B_unit`
//! are the corners of the axis-aligned unit cube centered at the origin.

use std::collections::BTreeMap;

use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

/// Tolerance on `RᵀR = I` and `det R = 1` when a cuboid is constructed.
pub const ROTATION_TOL: f64 = 1e-9;

/// Log-dimension inputs are clamped to this magnitude before `exp`.
pub const LOG_DIM_LIMIT: f64 = 10.0;

const DEGENERATE_EPS: f64 = 1e-12;

/// Oriented 3D box: center (m), dimensions `(w, h, l)` (m) along the local
/// x/y/z axes, and an object-to-camera rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cuboid {
    center: Vec3,
    dims: Vec3,
    rotation: Mat3,
}

impl Cuboid {
    pub fn new(center: Vec3, dims: Vec3, rotation: Mat3) -> Result<Self> {
        if center.iter().chain(dims.iter()).chain(rotation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCuboid("non-finite component".into()));
        }
        if dims.iter().any(|&d| d <= 0.0) {
            return Err(Error::InvalidCuboid(format!(
                "dimensions must be positive, got ({}, {}, {})",
                dims.x, dims.y, dims.z
            )));
        }
        let err = orthonormality_error(&rotation);
        if err > ROTATION_TOL {
            return Err(Error::InvalidCuboid(format!(
                "rotation is not a proper rotation (error {err:.3e})"
            )));
        }
        Ok(Self {
            center,
            dims,
            rotation,
        })
    }

    pub fn axis_aligned(center: Vec3, dims: Vec3) -> Result<Self> {
        Self::new(center, dims, Mat3::identity())
    }

    pub fn center(&self) -> &Vec3 {
        &self.center
    }

    pub fn dims(&self) -> &Vec3 {
        &self.dims
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn volume(&self) -> f64 {
        self.dims.x * self.dims.y * self.dims.z
    }

    pub fn half_extents(&self) -> Vec3 {
        self.dims * 0.5
    }

    /// The 8 corners, `R * d * B_unit + X`.
    ///
    /// Corner `i` uses the sign pattern of bits `(i & 1, i & 2, i & 4)` for
    /// local `(x, y, z)`, a clear bit meaning `-1/2`. So x varies fastest,
    /// then y, then z.
    pub fn corners(&self) -> [Vec3; 8] {
        let half = self.half_extents();
        std::array::from_fn(|i| {
            let local = Vec3::new(
                if i & 1 == 0 { -half.x } else { half.x },
                if i & 2 == 0 { -half.y } else { half.y },
                if i & 4 == 0 { -half.z } else { half.z },
            );
            self.rotation * local + self.center
        })
    }

    /// Whether `p` lies in the closed box.
    pub fn contains(&self, p: &Vec3) -> bool {
        let local = self.rotation.tr_mul(&(p - self.center));
        let half = self.half_extents();
        local.x.abs() <= half.x && local.y.abs() <= half.y && local.z.abs() <= half.z
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        let half = self.half_extents();
        let r = self.rotation.abs();
        let ext = r * half;
        (self.center - ext, self.center + ext)
    }

    /// The same box under the rigid motion `p -> rot * p + t`.
    pub fn transformed(&self, rot: &Mat3, t: &Vec3) -> Result<Self> {
        Self::new(rot * self.center + t, self.dims, rot * self.rotation)
    }

    /// The box scaled about the camera origin by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.center * s, self.dims * s, self.rotation)
    }
}

/// Largest deviation of `m` from a proper rotation: `max |RᵀR - I|` combined
/// with `|det R - 1|`.
pub fn orthonormality_error(m: &Mat3) -> f64 {
    let gram = m.transpose() * m - Mat3::identity();
    let ortho = gram.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    ortho.max((m.determinant() - 1.0).abs())
}

/// Continuous 6D rotation: two stacked 3-vectors that are orthonormalized
/// into the first two columns of a rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rot6D(pub [f64; 6]);

impl Rot6D {
    pub fn first(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn second(&self) -> Vec3 {
        Vec3::new(self.0[3], self.0[4], self.0[5])
    }

    /// The first two columns of `r`.
    pub fn from_matrix(r: &Mat3) -> Self {
        let c1 = r.column(0);
        let c2 = r.column(1);
        Self([c1[0], c1[1], c1[2], c2[0], c2[1], c2[2]])
    }

    /// Gram-Schmidt: `r1 = norm(p1)`, `r2 = norm(p2 - (r1·p2) r1)`,
    /// `r3 = r1 × r2`.
    pub fn to_matrix(&self) -> Result<Mat3> {
        let p1 = self.first();
        let p2 = self.second();
        let n1 = p1.norm();
        if !(n1 > DEGENERATE_EPS) {
            return Err(Error::DegenerateRotation(format!("|p1| = {n1:e}")));
        }
        let cross = p1.cross(&p2).norm();
        if !(cross > DEGENERATE_EPS) {
            return Err(Error::DegenerateRotation(format!("|p1 x p2| = {cross:e}")));
        }
        let r1 = p1 / n1;
        let r2 = (p2 - r1.dot(&p2) * r1).normalize();
        let r3 = r1.cross(&r2);
        Ok(Mat3::from_columns(&[r1, r2, r3]))
    }
}

/// Rotation taking an allocentric orientation to the egocentric one for an
/// object seen along the ray through pixel `(u, v)`.
///
/// With `o` the unit ray and `a = (0, 0, 1)` the principal axis this is the
/// axis-angle rotation about `o × a` by `acos(o · a)`. On the principal ray
/// the axis vanishes together with the angle and the identity is returned.
pub fn ray_alignment(u_px: f64, v_px: f64, k: &Intrinsics) -> Mat3 {
    let o = k.ray(u_px, v_px);
    let a = Vec3::z();
    let axis = o.cross(&a);
    let sin = axis.norm();
    if sin < DEGENERATE_EPS {
        return Mat3::identity();
    }
    let angle = o.dot(&a).clamp(-1.0, 1.0).acos();
    Rotation3::from_axis_angle(&Unit::new_unchecked(axis / sin), angle).into_inner()
}

pub fn allocentric_to_egocentric(ra: &Mat3, u_px: f64, v_px: f64, k: &Intrinsics) -> Mat3 {
    ray_alignment(u_px, v_px, k) * ra
}

pub fn egocentric_to_allocentric(r: &Mat3, u_px: f64, v_px: f64, k: &Intrinsics) -> Mat3 {
    ray_alignment(u_px, v_px, k).tr_mul(r)
}

/// 2D region of interest in pixels: top-left corner, width and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi2D {
    pub rx: f64,
    pub ry: f64,
    pub rw: f64,
    pub rh: f64,
}

impl Roi2D {
    pub fn new(rx: f64, ry: f64, rw: f64, rh: f64) -> Result<Self> {
        if !(rw > 0.0 && rh > 0.0) || ![rx, ry, rw, rh].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "RoI must have positive finite size, got [{rx}, {ry}, {rw}, {rh}]"
            )));
        }
        Ok(Self { rx, ry, rw, rh })
    }

    /// Pixel at normalized RoI offset `(u, v)`; `(0.5, 0.5)` is the RoI center.
    pub fn pixel(&self, u: f64, v: f64) -> (f64, f64) {
        (self.rx + u * self.rw, self.ry + v * self.rh)
    }
}

/// Per-category mean dimensions `(w0, h0, l0)` in meters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryPriors(BTreeMap<String, [f64; 3]>);

impl CategoryPriors {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, category: impl Into<String>, dims: [f64; 3]) -> Result<()> {
        if dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidInput(format!("priors must be positive, got {dims:?}")));
        }
        self.0.insert(category.into(), dims);
        Ok(())
    }

    pub fn get(&self, category: &str) -> Result<Vec3> {
        self.0
            .get(category)
            .map(|d| Vec3::new(d[0], d[1], d[2]))
            .ok_or_else(|| Error::UnknownCategory(category.to_string()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The 13 regressed cube parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeParams {
    /// Projected center, normalized to the RoI.
    pub u: f64,
    pub v: f64,
    /// Metric depth in meters.
    pub z: f64,
    /// Log-normalized dimensions.
    pub w_bar: f64,
    pub h_bar: f64,
    pub l_bar: f64,
    /// Allocentric rotation.
    pub p: Rot6D,
    /// 3D uncertainty.
    pub mu: f64,
}

/// Everything outside the 13 parameters that decoding needs.
#[derive(Debug, Clone, Copy)]
pub struct DecodeContext<'a> {
    pub roi: Roi2D,
    pub intrinsics: &'a Intrinsics,
    pub priors: &'a CategoryPriors,
    pub category: &'a str,
}

/// Result of decoding, with a flag set when a log-dimension was clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoded {
    pub cuboid: Cuboid,
    pub dims_clamped: bool,
}

/// Camera-space center from the normalized RoI offset and depth.
pub fn decode_center(u: f64, v: f64, z: f64, roi: &Roi2D, k: &Intrinsics) -> Result<Vec3> {
    if !(z > 0.0) {
        return Err(Error::NonPositiveDepth(z));
    }
    let (x, y) = roi.pixel(u, v);
    k.backproject(x, y, z)
}

/// `diag(exp(w̄) w0, exp(h̄) h0, exp(l̄) l0)` with the log inputs clamped to
/// `±LOG_DIM_LIMIT`. The flag reports whether clamping happened.
pub fn decode_dims(log_dims: [f64; 3], prior: &Vec3) -> (Vec3, bool) {
    let mut clamped = false;
    let mut out = Vec3::zeros();
    for i in 0..3 {
        let raw = log_dims[i];
        let c = raw.clamp(-LOG_DIM_LIMIT, LOG_DIM_LIMIT);
        clamped |= c != raw;
        out[i] = c.exp() * prior[i];
    }
    (out, clamped)
}

/// Egocentric rotation for an allocentric 6D prediction seen at a pixel.
pub fn decode_rotation(p: &Rot6D, pixel: (f64, f64), k: &Intrinsics) -> Result<Mat3> {
    Ok(allocentric_to_egocentric(&p.to_matrix()?, pixel.0, pixel.1, k))
}

/// Full decode of the cube parameters into a camera-space cuboid.
///
/// `params.z` must already be metric depth. Out-of-range log-dimensions are
/// clamped; see [`decode_cuboid_strict`] for the variant that refuses them.
pub fn decode_cuboid(params: &CubeParams, ctx: &DecodeContext<'_>) -> Result<Cuboid> {
    let decoded = decode_cuboid_flagged(params, ctx)?;
    if decoded.dims_clamped {
        log::warn!(
            "log-dimensions ({}, {}, {}) clamped to +/-{LOG_DIM_LIMIT}",
            params.w_bar,
            params.h_bar,
            params.l_bar
        );
    }
    Ok(decoded.cuboid)
}

/// Like [`decode_cuboid`] but fails instead of clamping.
pub fn decode_cuboid_strict(params: &CubeParams, ctx: &DecodeContext<'_>) -> Result<Cuboid> {
    let decoded = decode_cuboid_flagged(params, ctx)?;
    if decoded.dims_clamped {
        return Err(Error::InvalidInput(format!(
            "log-dimensions ({}, {}, {}) outside +/-{LOG_DIM_LIMIT}",
            params.w_bar, params.h_bar, params.l_bar
        )));
    }
    Ok(decoded.cuboid)
}

pub fn decode_cuboid_flagged(params: &CubeParams, ctx: &DecodeContext<'_>) -> Result<Decoded> {
    let center = decode_center(params.u, params.v, params.z, &ctx.roi, ctx.intrinsics)?;
    let prior = ctx.priors.get(ctx.category)?;
    let (dims, dims_clamped) = decode_dims([params.w_bar, params.h_bar, params.l_bar], &prior);
    let rotation = decode_rotation(&params.p, ctx.roi.pixel(params.u, params.v), ctx.intrinsics)?;
    Ok(Decoded {
        cuboid: Cuboid::new(center, dims, rotation)?,
        dims_clamped,
    })
}

/// Final detection score `sqrt(s * exp(-mu))`.
pub fn score_fusion(s: f64, mu: f64) -> f64 {
    (s * (-mu).exp()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn rot_y(angle: f64) -> Mat3 {
        Rotation3::from_axis_angle(&Vec3::y_axis(), angle).into_inner()
    }

    fn sorted(mut pts: Vec<[f64; 3]>) -> Vec<[f64; 3]> {
        for p in pts.iter_mut() {
            for v in p.iter_mut() {
                *v = (*v * 1e9).round() / 1e9;
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts
    }

    #[test]
    fn unit_cube_corners() {
        let c = Cuboid::axis_aligned(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        let corners = c.corners();
        assert_eq!(corners[0], Vec3::new(-0.5, -0.5, -0.5));
        assert_eq!(corners[1], Vec3::new(0.5, -0.5, -0.5));
        assert_eq!(corners[2], Vec3::new(-0.5, 0.5, -0.5));
        assert_eq!(corners[7], Vec3::new(0.5, 0.5, 0.5));
        for p in corners {
            assert!(p.iter().all(|v| v.abs() == 0.5));
        }
    }

    #[test]
    fn scaled_translated_corners() {
        let c = Cuboid::axis_aligned(Vec3::new(0.0, 0.0, 5.0), Vec3::new(2.0, 1.0, 1.0)).unwrap();
        let corners = c.corners();
        let range = |k: usize| {
            let lo = corners.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = corners.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        assert_eq!(range(0), (-1.0, 1.0));
        assert_eq!(range(1), (-0.5, 0.5));
        assert_eq!(range(2), (4.5, 5.5));
    }

    #[test]
    fn quarter_turn_cube_has_same_corner_set() {
        let a = Cuboid::axis_aligned(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        let b = Cuboid::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), rot_y(FRAC_PI_2)).unwrap();
        let set = |c: &Cuboid| sorted(c.corners().iter().map(|p| [p.x, p.y, p.z]).collect());
        assert_eq!(set(&a), set(&b));
    }

    #[test]
    fn cuboid_rejects_invalid() {
        let r = Mat3::identity();
        assert!(Cuboid::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0), r).is_err());
        assert!(Cuboid::new(Vec3::zeros(), Vec3::new(1.0, -1.0, 1.0), r).is_err());
        let mut skew = r;
        skew[(0, 1)] = 1e-6;
        assert!(Cuboid::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), skew).is_err());
        let reflect = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(Cuboid::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), reflect).is_err());
    }

    #[test]
    fn rot6d_examples() {
        let id = Rot6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).to_matrix().unwrap();
        assert_eq!(id, Mat3::identity());

        let m = Rot6D([2.0, 0.0, 0.0, 0.0, 0.0, 3.0]).to_matrix().unwrap();
        assert_eq!(m.column(0), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(m.column(1), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(m.column(2), Vec3::new(0.0, -1.0, 0.0));
    }

    #[test]
    fn rot6d_degenerate() {
        assert!(matches!(
            Rot6D([0.0; 6]).to_matrix(),
            Err(Error::DegenerateRotation(_))
        ));
        assert!(matches!(
            Rot6D([1.0, 2.0, 3.0, 2.0, 4.0, 6.0]).to_matrix(),
            Err(Error::DegenerateRotation(_))
        ));
        assert!(matches!(
            Rot6D([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).to_matrix(),
            Err(Error::DegenerateRotation(_))
        ));
    }

    #[test]
    fn principal_ray_keeps_allocentric() {
        let k = Intrinsics::new(700.0, 650.0, 320.0, 240.0, 640.0, 480.0).unwrap();
        let ra = rot_y(0.3);
        assert_eq!(allocentric_to_egocentric(&ra, 320.0, 240.0, &k), ra);
    }

    #[test]
    fn off_axis_ray_rotates_about_minus_y() {
        let f = 600.0;
        let k = Intrinsics::new(f, f, 300.0, 200.0, 600.0, 400.0).unwrap();
        let m = allocentric_to_egocentric(&Mat3::identity(), 300.0 + f, 200.0, &k);
        // Independent Rodrigues formula for axis (0, -1, 0), angle pi/4.
        let (s, c) = FRAC_PI_4.sin_cos();
        let kx = Mat3::new(0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let expected = Mat3::identity() + s * kx + (1.0 - c) * kx * kx;
        assert_relative_eq!(m, expected, epsilon = 1e-15);
        // The ray through the pixel is carried onto the optical axis.
        let o = Vec3::new(1.0, 0.0, 1.0).normalize();
        assert_relative_eq!(m * o, Vec3::z(), epsilon = 1e-15);
    }

    #[test]
    fn decode_lands_on_principal_point() {
        let k = Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640.0, 480.0).unwrap();
        let mut priors = CategoryPriors::new();
        priors.insert("chair", [1.0, 2.0, 3.0]).unwrap();
        let ctx = DecodeContext {
            roi: Roi2D::new(270.0, 190.0, 100.0, 100.0).unwrap(),
            intrinsics: &k,
            priors: &priors,
            category: "chair",
        };
        let params = CubeParams {
            u: 0.5,
            v: 0.5,
            z: 4.0,
            w_bar: 0.0,
            h_bar: 0.0,
            l_bar: 0.0,
            p: Rot6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            mu: 0.0,
        };
        let c = decode_cuboid(&params, &ctx).unwrap();
        assert_eq!(*c.center(), Vec3::new(0.0, 0.0, 4.0));
        assert_eq!(*c.dims(), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(*c.rotation(), Mat3::identity());

        let bad = CubeParams { z: 0.0, ..params };
        assert!(matches!(decode_cuboid(&bad, &ctx), Err(Error::NonPositiveDepth(_))));
        let unknown = DecodeContext {
            category: "sofa",
            ..ctx
        };
        assert!(matches!(
            decode_cuboid(&params, &unknown),
            Err(Error::UnknownCategory(_))
        ));
    }

    #[test]
    fn dims_clamp_and_strict_mode() {
        let k = Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640.0, 480.0).unwrap();
        let mut priors = CategoryPriors::new();
        priors.insert("car", [1.6, 1.5, 4.0]).unwrap();
        let ctx = DecodeContext {
            roi: Roi2D::new(0.0, 0.0, 50.0, 50.0).unwrap(),
            intrinsics: &k,
            priors: &priors,
            category: "car",
        };
        let params = CubeParams {
            u: 0.2,
            v: 0.7,
            z: 12.0,
            w_bar: 50.0,
            h_bar: 0.0,
            l_bar: -3.0,
            p: Rot6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            mu: 0.0,
        };
        let d = decode_cuboid_flagged(&params, &ctx).unwrap();
        assert!(d.dims_clamped);
        assert_relative_eq!(d.cuboid.dims().x, 10f64.exp() * 1.6);
        assert!(decode_cuboid_strict(&params, &ctx).is_err());
        let ok = CubeParams { w_bar: 0.1, ..params };
        assert!(!decode_cuboid_flagged(&ok, &ctx).unwrap().dims_clamped);
        assert!(decode_cuboid_strict(&ok, &ctx).is_ok());
    }

    #[test]
    fn score_fusion_examples() {
        assert_eq!(score_fusion(1.0, 0.0), 1.0);
        assert_eq!(score_fusion(0.0, 5.0), 0.0);
        assert_eq!(score_fusion(0.0, -5.0), 0.0);
        assert_relative_eq!(score_fusion(0.81, 0.81f64.ln()), 1.0, epsilon = 1e-15);
        assert_relative_eq!(score_fusion(0.49, 0.0), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn aabb_of_rotated_cube() {
        let c = Cuboid::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(1.0, 1.0, 1.0), rot_y(FRAC_PI_4))
            .unwrap();
        let (lo, hi) = c.aabb();
        let h = 0.5 * 2f64.sqrt();
        assert_relative_eq!(lo, Vec3::new(1.0 - h, 1.5, 3.0 - h), epsilon = 1e-12);
        assert_relative_eq!(hi, Vec3::new(1.0 + h, 2.5, 3.0 + h), epsilon = 1e-12);
    }
}
