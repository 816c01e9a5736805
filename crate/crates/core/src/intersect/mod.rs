//! IoU of oriented cuboids.

mod approx;
mod exact;
mod mesh;
mod oracle;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Cuboid;

pub use approx::iou3d_approx_groundplane;
pub use exact::{intersect_shape, iou3d, IntersectionShape, AREA_EPS, COPLANAR_ANGLE, PLANE_EPS};
pub use mesh::{box_to_mesh, signed_volume, BoxId, TriFace};
pub use oracle::{mc_iou_oracle, OracleEstimate};

/// Dense row-major matrix of IoUs; rows are predictions, columns ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct IoUMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl IoUMatrix {
    /// Wraps row-major `values`; panics if the length is not `rows * cols`.
    pub fn from_parts(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols, "IoU matrix shape mismatch");
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn fill(preds: &[Cuboid], gts: &[Cuboid], kernel: fn(&Cuboid, &Cuboid) -> f64) -> IoUMatrix {
    let (rows, cols) = (preds.len(), gts.len());
    let mut values = vec![0.0; rows * cols];
    if rows > 0 && cols > 0 {
        values.par_chunks_mut(cols).zip(preds.par_iter()).for_each(|(out, p)| {
            for (o, g) in out.iter_mut().zip(gts) {
                *o = kernel(p, g);
            }
        });
    }
    IoUMatrix { rows, cols, values }
}

/// All pairwise exact IoUs on the current rayon pool. Every entry equals
/// [`iou3d`] of the same pair bit for bit, whatever the thread count.
pub fn iou3d_batched(preds: &[Cuboid], gts: &[Cuboid]) -> IoUMatrix {
    fill(preds, gts, iou3d)
}

/// [`iou3d_batched`] on a dedicated pool of `threads` workers.
pub fn iou3d_batched_with_threads(preds: &[Cuboid], gts: &[Cuboid], threads: usize) -> Result<IoUMatrix> {
    with_threads(threads, || iou3d_batched(preds, gts))
}

/// Pairwise ground-plane approximations, same layout as [`iou3d_batched`].
pub fn approx_batched(preds: &[Cuboid], gts: &[Cuboid]) -> IoUMatrix {
    fill(preds, gts, iou3d_approx_groundplane)
}

/// Runs `f` inside a rayon pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}
