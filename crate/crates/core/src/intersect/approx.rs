//! Ground-plane IoU: top-view footprint overlap times vertical overlap.
//!
//! This is the approximation commonly used by driving benchmarks. It is
//! exact for boxes that only rotate about the vertical (y) axis and wrong
//! as soon as a box is pitched or rolled.

use crate::geometry::Cuboid;

type P2 = [f64; 2];

fn cross(o: &P2, a: &P2, b: &P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
fn convex_hull(mut pts: Vec<P2>) -> Vec<P2> {
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<P2> = Vec::with_capacity(2 * pts.len());
    for p in &pts {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

fn polygon_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (&poly[i], &poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    0.5 * twice.abs()
}

/// Intersection of two counter-clockwise convex polygons.
fn clip_convex(subject: &[P2], clip: &[P2]) -> Vec<P2> {
    let mut out = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let (a, b) = (&clip[i], &clip[(i + 1) % m]);
        let input = std::mem::take(&mut out);
        let n = input.len();
        for k in 0..n {
            let p = &input[k];
            let q = &input[(k + 1) % n];
            let dp = cross(a, b, p);
            let dq = cross(a, b, q);
            if dp >= 0.0 {
                out.push(*p);
            }
            if (dp >= 0.0) != (dq >= 0.0) {
                let t = dp / (dp - dq);
                out.push([p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]);
            }
        }
    }
    out
}

struct Prism {
    footprint: Vec<P2>,
    area: f64,
    y_min: f64,
    y_max: f64,
}

impl Prism {
    fn of(c: &Cuboid) -> Self {
        let corners = c.corners();
        let footprint = convex_hull(corners.iter().map(|p| [p.x, p.z]).collect());
        let y_min = corners.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let y_max = corners.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let area = polygon_area(&footprint);
        Self {
            footprint,
            area,
            y_min,
            y_max,
        }
    }

    fn volume(&self) -> f64 {
        self.area * (self.y_max - self.y_min)
    }
}

/// Ground-plane approximation of 3D IoU.
pub fn iou3d_approx_groundplane(b1: &Cuboid, b2: &Cuboid) -> f64 {
    let p1 = Prism::of(b1);
    let p2 = Prism::of(b2);
    let height = (p1.y_max.min(p2.y_max) - p1.y_min.max(p2.y_min)).max(0.0);
    if height <= 0.0 {
        return 0.0;
    }
    let area = polygon_area(&clip_convex(&p1.footprint, &p2.footprint));
    let inter = area * height;
    if !(inter > 0.0) {
        return 0.0;
    }
    (inter / (p1.volume() + p2.volume() - inter)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intersect::iou3d;
    use crate::{Mat3, Vec3};
    use nalgebra::Rotation3;

    fn yaw(a: f64) -> Mat3 {
        Rotation3::from_axis_angle(&Vec3::y_axis(), a).into_inner()
    }

    #[test]
    fn hull_of_square_with_interior_point() {
        let hull = convex_hull(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]);
        assert_eq!(hull.len(), 4);
        assert_eq!(polygon_area(&hull), 1.0);
    }

    #[test]
    fn yaw_only_matches_exact() {
        let a = Cuboid::new(Vec3::new(0.0, 1.0, 10.0), Vec3::new(1.8, 1.5, 4.2), yaw(0.3)).unwrap();
        let b = Cuboid::new(Vec3::new(0.6, 1.0, 10.8), Vec3::new(1.7, 1.5, 3.9), yaw(-0.5)).unwrap();
        let exact = iou3d(&a, &b);
        assert!(exact > 0.1);
        assert!((iou3d_approx_groundplane(&a, &b) - exact).abs() < 1e-9);
    }

    #[test]
    fn disjoint_is_zero() {
        let a = Cuboid::axis_aligned(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        let b = Cuboid::axis_aligned(Vec3::new(3.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(iou3d_approx_groundplane(&a, &b), 0.0);
        let above = Cuboid::axis_aligned(Vec3::new(0.0, -2.0, 0.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(iou3d_approx_groundplane(&a, &above), 0.0);
    }

    #[test]
    fn pitched_boxes_diverge() {
        let pitch = Rotation3::from_axis_angle(&Vec3::x_axis(), 30f64.to_radians()).into_inner();
        let a = Cuboid::new(Vec3::new(0.0, 0.0, 8.0), Vec3::new(1.0, 1.0, 3.0), pitch).unwrap();
        let b = Cuboid::new(Vec3::new(0.0, 0.3, 8.4), Vec3::new(1.0, 1.0, 3.0), pitch).unwrap();
        let gap = (iou3d_approx_groundplane(&a, &b) - iou3d(&a, &b)).abs();
        assert!(gap > 1e-3, "gap {gap}");
    }
}
