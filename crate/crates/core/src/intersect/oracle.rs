//! Monte-Carlo IoU estimate used to cross-check the exact kernel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::Cuboid;
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub estimate: f64,
    /// Binomial standard error of `estimate`.
    pub stderr: f64,
    /// Samples that fell in the union.
    pub accepted: u64,
}

impl OracleEstimate {
    /// Whether `value` lies within `k` standard errors of the estimate.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (value - self.estimate).abs() <= k * self.stderr
    }
}

struct Membership {
    center: Vec3,
    rot_t: Mat3,
    half: Vec3,
}

impl Membership {
    fn new(c: &Cuboid) -> Self {
        Self {
            center: *c.center(),
            rot_t: c.rotation().transpose(),
            half: c.half_extents(),
        }
    }

    #[inline]
    fn contains(&self, p: &Vec3) -> bool {
        let local = self.rot_t * (p - self.center);
        local.x.abs() <= self.half.x && local.y.abs() <= self.half.y && local.z.abs() <= self.half.z
    }
}

/// Uniform samples over the joint bounding box; points in the union are
/// accepted and the fraction of them inside both boxes estimates the IoU.
/// Deterministic for a fixed seed.
pub fn mc_iou_oracle(b1: &Cuboid, b2: &Cuboid, n_samples: u64, seed: u64) -> OracleEstimate {
    let (lo1, hi1) = b1.aabb();
    let (lo2, hi2) = b2.aabb();
    let lo = lo1.inf(&lo2);
    let span = hi1.sup(&hi2) - lo;
    let m1 = Membership::new(b1);
    let m2 = Membership::new(b2);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut union = 0u64;
    let mut both = 0u64;
    for _ in 0..n_samples.max(1) {
        let p = Vec3::new(
            lo.x + span.x * rng.random::<f64>(),
            lo.y + span.y * rng.random::<f64>(),
            lo.z + span.z * rng.random::<f64>(),
        );
        let in1 = m1.contains(&p);
        let in2 = m2.contains(&p);
        if in1 || in2 {
            union += 1;
            if in1 && in2 {
                both += 1;
            }
        }
    }
    if union == 0 {
        return OracleEstimate {
            estimate: 0.0,
            stderr: 0.0,
            accepted: 0,
        };
    }
    let p = both as f64 / union as f64;
    OracleEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / union as f64).sqrt(),
        accepted: union,
    }
}
