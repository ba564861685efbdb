//! Point cloud meshing guided by the intrinsic-extrinsic ratio (IER).
//!
//! The toolkit connects the points of an input cloud into a triangle mesh.
//! Candidate triangles come from a k-nearest-neighbor graph; each candidate is
//! scored by comparing on-surface (geodesic) distances between its vertices to
//! their straight-line distances; survivors are merged greedily into a mesh
//! that stays free of self-intersections and non-manifold edges.
//!
//! With a reference mesh the scores are exact ([`pipeline::remesh`]); without
//! one a small classifier predicts them ([`pipeline::reconstruct`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembler;
pub mod candidates;
pub mod classifier;
pub mod clean;
mod error;
pub mod geodesics;
pub mod geom;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod shapes;
pub mod spatial;

pub use error::{Error, Result};
pub use geom::{Point, Vector};
pub use mesh::{normalize, EdgeKey, Normalization, PointCloud, TriangleMesh};
