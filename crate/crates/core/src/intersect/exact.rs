//! Exact intersection of two oriented cuboids by face clipping.
//!
//! The intersection of two boxes is a convex polyhedron whose boundary is
//! made of pieces of the faces of either box. Each triangle of one box is
//! clipped against the six half-spaces of the other; the surviving
//! fragments of both passes form the closed boundary, except where faces of
//! the two boxes are coplanar with the same orientation, in which case both
//! passes produce the same region and only the first box's copy is kept.
//! The volume follows from the divergence theorem.

use crate::geometry::Cuboid;
use crate::Vec3;

use super::mesh::{mesh_triangles, BoxId, TriFace};

/// A point is inside a half-space when its signed distance is at most this.
pub const PLANE_EPS: f64 = 1e-9;

/// Fragments with area at or below this are dropped.
pub const AREA_EPS: f64 = 1e-12;

/// Largest angle between normals for two faces to count as coplanar.
pub const COPLANAR_ANGLE: f64 = 1e-6;

/// Boxes whose bounding boxes are separated by more than this never touch.
const AABB_GAP: f64 = 1e-6;

/// Boundary of the intersection of two cuboids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntersectionShape {
    pub faces: Vec<TriFace>,
    pub volume: f64,
}

impl IntersectionShape {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct Plane {
    normal: Vec3,
    offset: f64,
}

impl Plane {
    #[inline]
    fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Outward planes of the six faces, in mesh face order.
fn face_planes(c: &Cuboid) -> [Plane; 6] {
    let half = c.half_extents();
    let r = c.rotation();
    std::array::from_fn(|f| {
        let axis = f / 2;
        let sign = if f % 2 == 0 { -1.0 } else { 1.0 };
        let normal: Vec3 = r.column(axis) * sign;
        Plane {
            normal,
            offset: normal.dot(c.center()) + half[axis],
        }
    })
}

const MAX_POLY: usize = 12;

/// Small fixed-capacity convex polygon. A triangle clipped by six planes has
/// at most nine vertices.
#[derive(Clone, Copy)]
struct Poly {
    pts: [Vec3; MAX_POLY],
    len: usize,
}

impl Poly {
    fn from_triangle(t: &[Vec3; 3]) -> Self {
        let mut pts = [Vec3::zeros(); MAX_POLY];
        pts[..3].copy_from_slice(t);
        Self { pts, len: 3 }
    }

    fn push(&mut self, p: Vec3) {
        debug_assert!(self.len < MAX_POLY);
        self.pts[self.len] = p;
        self.len += 1;
    }

    fn as_slice(&self) -> &[Vec3] {
        &self.pts[..self.len]
    }
}

/// Keeps the part of `poly` with signed distance `<= PLANE_EPS`. Crossing
/// points are placed on the plane itself.
fn clip_against(poly: &Poly, plane: &Plane) -> Poly {
    let mut dist = [0.0; MAX_POLY];
    let mut inside_all = true;
    let mut outside_all = true;
    for (d, p) in dist.iter_mut().zip(poly.as_slice()) {
        *d = plane.distance(p);
        if *d <= PLANE_EPS {
            outside_all = false;
        } else {
            inside_all = false;
        }
    }
    if inside_all {
        return *poly;
    }
    let mut out = Poly {
        pts: [Vec3::zeros(); MAX_POLY],
        len: 0,
    };
    if outside_all {
        return out;
    }
    let n = poly.len;
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b) = (&poly.pts[i], &poly.pts[j]);
        let (da, db) = (dist[i], dist[j]);
        let a_in = da <= PLANE_EPS;
        let b_in = db <= PLANE_EPS;
        if a_in {
            out.push(*a);
        }
        if a_in != b_in {
            let t = da / (da - db);
            out.push(a + (b - a) * t);
        }
    }
    out
}

fn clip_mesh_into(
    triangles: &[[Vec3; 3]; 12],
    source: BoxId,
    planes: &[Plane; 6],
    skip_face: &[bool; 6],
    out: &mut Vec<TriFace>,
) {
    for (t, tri) in triangles.iter().enumerate() {
        if skip_face[t / 2] {
            continue;
        }
        let mut poly = Poly::from_triangle(tri);
        for plane in planes {
            poly = clip_against(&poly, plane);
            if poly.len < 3 {
                break;
            }
        }
        if poly.len < 3 {
            continue;
        }
        let pts = poly.as_slice();
        for k in 1..pts.len() - 1 {
            let face = TriFace {
                vertices: [pts[0], pts[k], pts[k + 1]],
                source,
            };
            if face.area() > AREA_EPS {
                out.push(face);
            }
        }
    }
}

fn coplanar_same_side(a: &Plane, b: &Plane) -> bool {
    let angle = a.normal.cross(&b.normal).norm().atan2(a.normal.dot(&b.normal));
    angle <= COPLANAR_ANGLE && (a.offset - b.offset).abs() <= PLANE_EPS
}

pub(crate) fn aabbs_separated(b1: &Cuboid, b2: &Cuboid) -> bool {
    let (lo1, hi1) = b1.aabb();
    let (lo2, hi2) = b2.aabb();
    (0..3).any(|k| lo1[k] - hi2[k] > AABB_GAP || lo2[k] - hi1[k] > AABB_GAP)
}

/// The closed boundary of `b1 ∩ b2` together with its volume.
pub fn intersect_shape(b1: &Cuboid, b2: &Cuboid) -> IntersectionShape {
    if aabbs_separated(b1, b2) {
        return IntersectionShape::default();
    }
    let planes1 = face_planes(b1);
    let planes2 = face_planes(b2);

    // Faces of b2 lying on a face of b1 with the same outward direction cover
    // the region already produced by the b1 pass.
    let mut skip2 = [false; 6];
    for (j, p2) in planes2.iter().enumerate() {
        skip2[j] = planes1.iter().any(|p1| coplanar_same_side(p1, p2));
    }

    let mut faces = Vec::with_capacity(32);
    clip_mesh_into(
        &mesh_triangles(&b1.corners()),
        BoxId::First,
        &planes2,
        &[false; 6],
        &mut faces,
    );
    clip_mesh_into(
        &mesh_triangles(&b2.corners()),
        BoxId::Second,
        &planes1,
        &skip2,
        &mut faces,
    );

    let volume = enclosed_volume(&faces);
    IntersectionShape { faces, volume }
}

/// Divergence-theorem volume measured against the vertex centroid.
fn enclosed_volume(faces: &[TriFace]) -> f64 {
    if faces.is_empty() {
        return 0.0;
    }
    let mut centroid = Vec3::zeros();
    for f in faces {
        centroid += f.vertices[0] + f.vertices[1] + f.vertices[2];
    }
    centroid /= (3 * faces.len()) as f64;
    super::mesh::signed_volume(faces, &centroid).abs()
}

/// Intersection over union of two oriented cuboids.
pub fn iou3d(b1: &Cuboid, b2: &Cuboid) -> f64 {
    if b1 == b2 {
        return 1.0;
    }
    if aabbs_separated(b1, b2) {
        return 0.0;
    }
    let inter = intersect_shape(b1, b2).volume;
    if !(inter > 0.0) {
        return 0.0;
    }
    let union = b1.volume() + b2.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}
