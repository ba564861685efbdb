//! Exact spatial indices: a k-d tree over points and a BVH over triangles.

mod bvh;
mod grid;
mod kdtree;

pub use bvh::TriangleBvh;
pub use grid::DistanceGrid;
pub use kdtree::KdTree;

use crate::geom::Point;

/// Squared Euclidean distance with a fixed summation order, so that every
/// module (and every oracle) computes bit-identical values.
#[inline]
pub fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}
