//! Pinhole intrinsics and the virtual-depth transform.
//!
//! Virtual depth rescales metric depth so that every image behaves as if it
//! were taken by one shared camera with focal length `f_v` and image height
//! `H_v`:
//!
//! ```text
//! z_v = z * (f_v / f) * (H / H_v)
//! ```
//!
//! With anisotropic intrinsics the vertical focal length `fy` plays the role
//! of `f`, because the derivation is carried out on image rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// Pinhole camera intrinsics together with the image size.
///
/// The values are stored at a base resolution plus a cumulative rescale
/// factor. Accessors return the effective (rescaled) values. Ratios that must
/// not depend on the image scale, such as `H / fy` in the virtual depth, are
/// taken from the base values so that rescaling leaves them bit-identical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    fx: f64,
    fy: f64,
    px: f64,
    py: f64,
    width: f64,
    height: f64,
    scale: f64,
    estimated: bool,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, px: f64, py: f64, width: f64, height: f64) -> Result<Self> {
        let all = [fx, fy, px, py, width, height];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidIntrinsics("non-finite value".into()));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx = {fx}, fy = {fy})"
            )));
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "image size must be positive ({width} x {height})"
            )));
        }
        Ok(Self {
            fx,
            fy,
            px,
            py,
            width,
            height,
            scale: 1.0,
            estimated: false,
        })
    }

    /// Intrinsics guessed for images without calibration: `f = 2H`, principal
    /// point at the image center. The result is flagged as estimated.
    pub fn estimated_from_image(width: f64, height: f64) -> Result<Self> {
        let f = 2.0 * height;
        let mut k = Self::new(f, f, width / 2.0, height / 2.0, width, height)?;
        k.estimated = true;
        Ok(k)
    }

    pub fn fx(&self) -> f64 {
        self.fx * self.scale
    }

    pub fn fy(&self) -> f64 {
        self.fy * self.scale
    }

    pub fn px(&self) -> f64 {
        self.px * self.scale
    }

    pub fn py(&self) -> f64 {
        self.py * self.scale
    }

    pub fn width(&self) -> f64 {
        self.width * self.scale
    }

    pub fn height(&self) -> f64 {
        self.height * self.scale
    }

    pub fn is_estimated(&self) -> bool {
        self.estimated
    }

    /// Intrinsics of the same camera after resizing the image by `s`.
    pub fn rescale(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("scale factor must be positive, got {s}")));
        }
        Ok(Self {
            scale: self.scale * s,
            ..*self
        })
    }

    /// `H / fy`, independent of any rescaling.
    fn height_over_focal(&self) -> f64 {
        self.height / self.fy
    }

    /// Pinhole projection of a camera-space point to pixel coordinates.
    pub fn project(&self, point: &Vec3) -> Result<(f64, f64)> {
        if point.z <= 0.0 {
            return Err(Error::BehindCamera(point.z));
        }
        Ok((
            self.fx() * point.x / point.z + self.px(),
            self.fy() * point.y / point.z + self.py(),
        ))
    }

    /// Camera-space point at depth `z` seen at pixel `(x, y)`.
    pub fn backproject(&self, x: f64, y: f64, z: f64) -> Result<Vec3> {
        if z <= 0.0 {
            return Err(Error::NonPositiveDepth(z));
        }
        Ok(Vec3::new(
            z / self.fx() * (x - self.px()),
            z / self.fy() * (y - self.py()),
            z,
        ))
    }

    /// Unit ray direction through pixel `(x, y)`.
    pub fn ray(&self, x: f64, y: f64) -> Vec3 {
        Vec3::new((x - self.px()) / self.fx(), (y - self.py()) / self.fy(), 1.0).normalize()
    }
}

/// The shared camera that virtual depth is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualCamera {
    pub focal: f64,
    pub height: f64,
}

impl Default for VirtualCamera {
    fn default() -> Self {
        Self {
            focal: 512.0,
            height: 512.0,
        }
    }
}

impl VirtualCamera {
    pub fn new(focal: f64, height: f64) -> Result<Self> {
        if !(focal > 0.0 && height > 0.0 && focal.is_finite() && height.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "virtual camera parameters must be positive (f_v = {focal}, H_v = {height})"
            )));
        }
        Ok(Self { focal, height })
    }

    fn ratio(&self, k: &Intrinsics) -> f64 {
        (self.focal / self.height) * k.height_over_focal()
    }
}

/// Metric depth to virtual depth: `z * (f_v / fy) * (H / H_v)`.
pub fn to_virtual_depth(z: f64, k: &Intrinsics, v: &VirtualCamera) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::NonPositiveDepth(z));
    }
    Ok(z * v.ratio(k))
}

/// Inverse of [`to_virtual_depth`].
pub fn from_virtual_depth(z_v: f64, k: &Intrinsics, v: &VirtualCamera) -> Result<f64> {
    if !(z_v > 0.0) {
        return Err(Error::NonPositiveDepth(z_v));
    }
    Ok(z_v / v.ratio(k))
}
