//! Geometry and evaluation kernels for image-based 3D object detection.
//!
//! * [`geometry`]: oriented cuboids, 6D rotations, allocentric/egocentric
//!   conversion and decoding of the 13-parameter cube prediction.
//! * [`camera`]: pinhole intrinsics and the virtual-depth transform.
//! * [`intersect`]: exact IoU of oriented cuboids by face clipping, a
//!   ground-plane approximation and a Monte-Carlo oracle.
//! * [`losses`]: forward kernels of the corner-space training losses.
//! * [`eval`]: the AP3D protocol with ignore rules and depth bands.
//! * [`dataset`]: the annotation schema, loading and dataset statistics.

pub mod camera;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod intersect;
pub mod losses;
pub mod sampling;

pub use camera::{Intrinsics, VirtualCamera};
pub use error::{Error, Result};
pub use geometry::{CategoryPriors, CubeParams, Cuboid, Roi2D, Rot6D};
pub use intersect::{iou3d, iou3d_batched, IoUMatrix};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
