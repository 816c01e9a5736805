//! Forward kernels of the corner-space 3D losses.
//!
//! Conventions:
//! * the L1 distance between two boxes is the plain sum of absolute
//!   differences over the 8×3 corner array (no averaging);
//! * the chamfer distance is the mean nearest-neighbor Euclidean distance
//!   from `a` to `b` plus the same from `b` to `a`.

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{decode_center, decode_dims, decode_rotation, CubeParams, Cuboid, DecodeContext};
use crate::{Mat3, Vec3};

/// Symmetric chamfer distance between two 8-point corner sets.
pub fn chamfer_corners(a: &[Vec3; 8], b: &[Vec3; 8]) -> f64 {
    fn directed(from: &[Vec3; 8], to: &[Vec3; 8]) -> f64 {
        from.iter()
            .map(|p| to.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / 8.0
    }
    directed(a, b) + directed(b, a)
}

/// Elementwise L1 distance between corner arrays, in corner order.
pub fn l1_corners(a: &[Vec3; 8], b: &[Vec3; 8]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs().sum()).sum()
}

/// Variable groups of the disentangled loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    /// Projected center `(u, v)`.
    Uv,
    /// Depth.
    Z,
    /// Log-dimensions.
    Whl,
    /// 6D rotation.
    Pose,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Uv, Group::Z, Group::Whl, Group::Pose];
}

/// The three factors of a decoded box: center, dimensions, egocentric
/// rotation.
#[derive(Debug, Clone, Copy)]
struct Factors {
    center: Vec3,
    dims: Vec3,
    rotation: Mat3,
}

impl Factors {
    fn decode(params: &CubeParams, ctx: &DecodeContext<'_>) -> Result<Self> {
        let center = decode_center(params.u, params.v, params.z, &ctx.roi, ctx.intrinsics)?;
        let prior = ctx.priors.get(ctx.category)?;
        let (dims, _) = decode_dims([params.w_bar, params.h_bar, params.l_bar], &prior);
        let rotation = decode_rotation(&params.p, ctx.roi.pixel(params.u, params.v), ctx.intrinsics)?;
        Ok(Self {
            center,
            dims,
            rotation,
        })
    }

    fn corners(&self) -> Result<[Vec3; 8]> {
        Ok(Cuboid::new(self.center, self.dims, self.rotation)?.corners())
    }
}

/// Loss of one variable group with every other factor taken from ground
/// truth.
///
/// The pseudo box swaps one factor of the ground-truth box (center,
/// dimensions, or egocentric rotation) for the one decoded from `pred`.
/// `(u, v)` and `z` both feed the center, so for those groups the center is
/// re-decoded with the other coordinate taken from `gt`. The predicted pose
/// is made egocentric along the ground-truth ray so that it does not pick up
/// the predicted center. Uv, z and whl use the L1 corner distance; pose uses
/// chamfer so that symmetric boxes are not penalized.
pub fn disentangled_loss(
    group: Group,
    pred: &CubeParams,
    gt: &CubeParams,
    pred_ctx: &DecodeContext<'_>,
    gt_ctx: &DecodeContext<'_>,
) -> Result<f64> {
    let truth = Factors::decode(gt, gt_ctx)?;
    let mut pseudo = truth;
    match group {
        Group::Uv => {
            pseudo.center = decode_center(pred.u, pred.v, gt.z, &pred_ctx.roi, pred_ctx.intrinsics)?;
        }
        Group::Z => {
            pseudo.center = decode_center(gt.u, gt.v, pred.z, &gt_ctx.roi, gt_ctx.intrinsics)?;
        }
        Group::Whl => {
            let prior = pred_ctx.priors.get(pred_ctx.category)?;
            pseudo.dims = decode_dims([pred.w_bar, pred.h_bar, pred.l_bar], &prior).0;
        }
        Group::Pose => {
            pseudo.rotation = decode_rotation(&pred.p, gt_ctx.roi.pixel(gt.u, gt.v), gt_ctx.intrinsics)?;
        }
    }
    let a = pseudo.corners()?;
    let b = truth.corners()?;
    Ok(match group {
        Group::Pose => chamfer_corners(&a, &b),
        _ => l1_corners(&a, &b),
    })
}

/// Chamfer distance between the fully decoded prediction and ground truth.
pub fn entangled_loss(
    pred: &CubeParams,
    gt: &CubeParams,
    pred_ctx: &DecodeContext<'_>,
    gt_ctx: &DecodeContext<'_>,
) -> Result<f64> {
    let a = Factors::decode(pred, pred_ctx)?.corners()?;
    let b = Factors::decode(gt, gt_ctx)?.corners()?;
    Ok(chamfer_corners(&a, &b))
}

/// The five 3D loss terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossParts {
    pub all: f64,
    pub uv: f64,
    pub z: f64,
    pub whl: f64,
    pub pose: f64,
}

impl LossParts {
    pub fn sum(&self) -> f64 {
        self.all + self.uv + self.z + self.whl + self.pose
    }
}

/// `sqrt(2) * exp(-mu) * sum(parts) + mu`.
pub fn total_loss(parts: &LossParts, mu: f64) -> f64 {
    std::f64::consts::SQRT_2 * (-mu).exp() * parts.sum() + mu
}

/// The uncertainty that minimizes [`total_loss`] for fixed parts,
/// `ln(sqrt(2) * sum)`. `None` when the parts sum to zero (no minimum).
pub fn optimal_uncertainty(parts: &LossParts) -> Option<f64> {
    let s = parts.sum();
    (s > 0.0).then(|| (std::f64::consts::SQRT_2 * s).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub l_all: f64,
    pub l_uv: f64,
    pub l_z: f64,
    pub l_whl: f64,
    pub l_pose: f64,
    pub mu: f64,
    pub total: f64,
}

/// All five terms and the uncertainty-weighted total for one prediction.
/// The uncertainty is `pred.mu`.
pub fn loss_breakdown(
    pred: &CubeParams,
    gt: &CubeParams,
    pred_ctx: &DecodeContext<'_>,
    gt_ctx: &DecodeContext<'_>,
) -> Result<LossBreakdown> {
    let parts = LossParts {
        all: entangled_loss(pred, gt, pred_ctx, gt_ctx)?,
        uv: disentangled_loss(Group::Uv, pred, gt, pred_ctx, gt_ctx)?,
        z: disentangled_loss(Group::Z, pred, gt, pred_ctx, gt_ctx)?,
        whl: disentangled_loss(Group::Whl, pred, gt, pred_ctx, gt_ctx)?,
        pose: disentangled_loss(Group::Pose, pred, gt, pred_ctx, gt_ctx)?,
    };
    Ok(LossBreakdown {
        l_all: parts.all,
        l_uv: parts.uv,
        l_z: parts.z,
        l_whl: parts.whl,
        l_pose: parts.pose,
        mu: pred.mu,
        total: total_loss(&parts, pred.mu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use crate::geometry::{CategoryPriors, Roi2D, Rot6D};
    use nalgebra::Rotation3;
    use std::f64::consts::PI;

    fn unit_box(rot: Mat3) -> Cuboid {
        Cuboid::new(Vec3::new(0.2, -0.1, 6.0), Vec3::new(1.2, 0.8, 2.5), rot).unwrap()
    }

    #[test]
    fn chamfer_zero_cases() {
        let c = unit_box(Mat3::identity()).corners();
        assert_eq!(chamfer_corners(&c, &c), 0.0);
        let mut rev = c;
        rev.reverse();
        assert_eq!(chamfer_corners(&c, &rev), 0.0);
        let half_turn = Rotation3::from_axis_angle(&Vec3::y_axis(), PI).into_inner();
        let turned = unit_box(half_turn).corners();
        assert!(chamfer_corners(&c, &turned) < 1e-12);
        assert!(l1_corners(&c, &turned) > 1.0);
    }

    #[test]
    fn chamfer_of_translation() {
        let a = unit_box(Mat3::identity());
        let b = Cuboid::new(a.center() + Vec3::new(0.0, 0.0, 0.1), *a.dims(), Mat3::identity()).unwrap();
        // Each corner's nearest neighbor is its translated copy.
        assert!((chamfer_corners(&a.corners(), &b.corners()) - 0.2).abs() < 1e-12);
    }

    struct Fixture {
        k: Intrinsics,
        priors: CategoryPriors,
    }

    impl Fixture {
        fn new() -> Self {
            let mut priors = CategoryPriors::new();
            priors.insert("box", [1.0, 1.0, 1.0]).unwrap();
            Self {
                k: Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640.0, 480.0).unwrap(),
                priors,
            }
        }

        fn ctx(&self, roi: Roi2D) -> DecodeContext<'_> {
            DecodeContext {
                roi,
                intrinsics: &self.k,
                priors: &self.priors,
                category: "box",
            }
        }
    }

    fn gt_params() -> CubeParams {
        CubeParams {
            u: 0.5,
            v: 0.5,
            z: 5.0,
            w_bar: 0.0,
            h_bar: 0.0,
            l_bar: 0.0,
            p: Rot6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            mu: 0.0,
        }
    }

    #[test]
    fn zero_when_prediction_matches() {
        let fx = Fixture::new();
        let ctx = fx.ctx(Roi2D::new(270.0, 190.0, 100.0, 100.0).unwrap());
        let gt = CubeParams {
            u: 0.31,
            v: 0.62,
            z: 7.5,
            w_bar: 0.2,
            h_bar: -0.1,
            l_bar: 0.4,
            p: Rot6D([0.9, 0.1, -0.2, 0.0, 1.0, 0.3]),
            mu: 0.0,
        };
        for g in Group::ALL {
            assert_eq!(disentangled_loss(g, &gt, &gt, &ctx, &ctx).unwrap(), 0.0, "{g:?}");
        }
        assert_eq!(entangled_loss(&gt, &gt, &ctx, &ctx).unwrap(), 0.0);
    }

    #[test]
    fn uv_translation_fixture() {
        // Ground truth: unit cube at (0, 0, 5), identity rotation.
        let fx = Fixture::new();
        let ctx = fx.ctx(Roi2D::new(270.0, 190.0, 100.0, 100.0).unwrap());
        let gt = gt_params();
        // Moving the projected center 10 px right at fx = 500, z = 5 moves
        // the box center by 0.1 m along x.
        let pred = CubeParams { u: 0.6, ..gt };
        let loss = disentangled_loss(Group::Uv, &pred, &gt, &ctx, &ctx).unwrap();
        assert!((loss - 0.8).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn z_loss_ignores_other_variables() {
        let fx = Fixture::new();
        let ctx = fx.ctx(Roi2D::new(200.0, 150.0, 80.0, 120.0).unwrap());
        let gt = CubeParams { u: 0.3, v: 0.7, ..gt_params() };
        let pred = CubeParams { z: gt.z + 0.25, ..gt };
        let base = disentangled_loss(Group::Z, &pred, &gt, &ctx, &ctx).unwrap();
        let noisy = CubeParams {
            u: 0.9,
            w_bar: 1.0,
            p: Rot6D([0.0, 1.0, 0.0, 1.0, 0.0, 1.0]),
            ..pred
        };
        assert_eq!(disentangled_loss(Group::Z, &noisy, &gt, &ctx, &ctx).unwrap(), base);
        // Translating along the ray scales (x, y) of the center and shifts z.
        let c0 = decode_center(gt.u, gt.v, gt.z, &ctx.roi, &fx.k).unwrap();
        let c1 = decode_center(gt.u, gt.v, pred.z, &ctx.roi, &fx.k).unwrap();
        assert!((base - 8.0 * (c1 - c0).abs().sum()).abs() < 1e-12);
    }

    #[test]
    fn total_loss_examples() {
        assert_eq!(total_loss(&LossParts::default(), 0.0), 0.0);
        assert_eq!(total_loss(&LossParts::default(), 3.0), 3.0);
        let parts = LossParts {
            all: 0.4,
            uv: 0.1,
            z: 0.7,
            whl: 0.05,
            pose: 0.25,
        };
        let mu = optimal_uncertainty(&parts).unwrap();
        assert!((mu - (2f64.sqrt() * 1.5).ln()).abs() < 1e-15);
        assert!((total_loss(&parts, mu) - (mu + 1.0)).abs() < 1e-12);
        assert!(optimal_uncertainty(&LossParts::default()).is_none());
    }

    #[test]
    fn breakdown_is_consistent() {
        let fx = Fixture::new();
        let ctx = fx.ctx(Roi2D::new(270.0, 190.0, 100.0, 100.0).unwrap());
        let gt = gt_params();
        let pred = CubeParams {
            u: 0.55,
            z: 5.4,
            w_bar: 0.1,
            p: Rot6D([1.0, 0.0, 0.1, 0.0, 1.0, 0.0]),
            mu: 0.3,
            ..gt
        };
        let b = loss_breakdown(&pred, &gt, &ctx, &ctx).unwrap();
        let sum = b.l_all + b.l_uv + b.l_z + b.l_whl + b.l_pose;
        assert!((b.total - (2f64.sqrt() * (-0.3f64).exp() * sum + 0.3)).abs() < 1e-12);
        assert!([b.l_all, b.l_uv, b.l_z, b.l_whl, b.l_pose].iter().all(|v| *v > 0.0));
    }
}
