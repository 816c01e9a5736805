use crate::geometry::Cuboid;
use crate::Vec3;

/// Which input box a face fragment was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoxId {
    First,
    Second,
}

/// A triangle on the boundary of a box or of an intersection shape.
/// Vertices wind counter-clockwise seen from outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriFace {
    pub vertices: [Vec3; 3],
    pub source: BoxId,
}

impl TriFace {
    /// Area-weighted normal, twice the triangle area in length.
    pub fn scaled_normal(&self) -> Vec3 {
        let [a, b, c] = &self.vertices;
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        0.5 * self.scaled_normal().norm()
    }
}

/// Corner quads of the six faces in the order -x, +x, -y, +y, -z, +z, wound
/// so that the normal points out of the box. Indices follow
/// [`Cuboid::corners`].
pub(crate) const FACE_QUADS: [[usize; 4]; 6] = [
    [0, 4, 6, 2],
    [1, 3, 7, 5],
    [0, 1, 5, 4],
    [2, 6, 7, 3],
    [0, 2, 3, 1],
    [4, 5, 7, 6],
];

/// Triangle `t` of a box mesh lies on face `t / 2`.
pub(crate) fn mesh_triangles(corners: &[Vec3; 8]) -> [[Vec3; 3]; 12] {
    std::array::from_fn(|t| {
        let q = FACE_QUADS[t / 2];
        if t % 2 == 0 {
            [corners[q[0]], corners[q[1]], corners[q[2]]]
        } else {
            [corners[q[0]], corners[q[2]], corners[q[3]]]
        }
    })
}

/// The 12-triangle boundary mesh of a cuboid, two triangles per face.
pub fn box_to_mesh(c: &Cuboid, source: BoxId) -> [TriFace; 12] {
    let tris = mesh_triangles(&c.corners());
    std::array::from_fn(|t| TriFace {
        vertices: tris[t],
        source,
    })
}

/// Signed volume enclosed by a triangle soup, summed as tetrahedra against
/// `reference`. Positive for closed outward-wound surfaces.
pub fn signed_volume<'a>(faces: impl IntoIterator<Item = &'a TriFace>, reference: &Vec3) -> f64 {
    faces
        .into_iter()
        .map(|f| {
            let [a, b, c] = &f.vertices;
            (a - reference).dot(&(b - reference).cross(&(c - reference)))
        })
        .sum::<f64>()
        / 6.0
}
