//! Seeded random cuboids for benchmarks and randomized checks.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::Rng;

use crate::geometry::Cuboid;
use crate::{Mat3, Vec3};

/// Uniformly distributed rotation (Shoemake's quaternion method).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = Quaternion::new(
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
        b * (tau * u3).cos(),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

/// Rotation about the vertical (y) axis by a uniform angle.
pub fn random_yaw<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), angle).into_inner()
}

/// Box parameters drawn uniformly from per-axis ranges.
#[derive(Debug, Clone, Copy)]
pub struct BoxDistribution {
    pub center_lo: Vec3,
    pub center_hi: Vec3,
    pub dim_lo: f64,
    pub dim_hi: f64,
}

impl Default for BoxDistribution {
    /// Boxes crowded into a few cubic meters around 10 m depth, so that
    /// random pairs overlap often.
    fn default() -> Self {
        Self {
            center_lo: Vec3::new(-1.0, -1.0, 9.0),
            center_hi: Vec3::new(1.0, 1.0, 11.0),
            dim_lo: 0.1,
            dim_hi: 5.0,
        }
    }
}

impl BoxDistribution {
    fn center<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        Vec3::from_fn(|i, _| rng.random_range(self.center_lo[i]..=self.center_hi[i]))
    }

    fn dims<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        Vec3::from_fn(|_, _| rng.random_range(self.dim_lo..=self.dim_hi))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Cuboid {
        let c = self.center(rng);
        let d = self.dims(rng);
        Cuboid::new(c, d, random_rotation(rng)).expect("sampled box is valid")
    }

    pub fn sample_yaw<R: Rng + ?Sized>(&self, rng: &mut R) -> Cuboid {
        let c = self.center(rng);
        let d = self.dims(rng);
        Cuboid::new(c, d, random_yaw(rng)).expect("sampled box is valid")
    }

    pub fn sample_axis_aligned<R: Rng + ?Sized>(&self, rng: &mut R) -> Cuboid {
        let c = self.center(rng);
        let d = self.dims(rng);
        Cuboid::axis_aligned(c, d).expect("sampled box is valid")
    }
}
