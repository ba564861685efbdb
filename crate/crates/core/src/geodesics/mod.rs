//! Exact polyhedral geodesic distances between mesh vertices.
//!
//! [`local_geodesics`] propagates intervals of unfolded straight-line paths
//! ("windows") across faces from a source vertex, with a priority queue
//! ordered by each window's distance lower bound. Saddle and boundary vertices
//! re-emit windows as pseudo-sources. Windows are trimmed wherever some face
//! vertex already offers a path at least as short, and propagation stops at a
//! distance cutoff, so cost grows with the size of the neighborhood rather
//! than the mesh.
//!
//! [`oracle_geodesics`] is an independent upper bound (Dijkstra on a refined
//! graph) used to validate the exact solver.

mod oracle;
mod steiner;
mod window;

use std::collections::BTreeMap;

pub use oracle::oracle_geodesics;
pub use steiner::{insert_points, SteinerMesh};
pub use window::GeodesicSolver;

use crate::geom::Point;
use crate::mesh::{EdgeKey, TriangleMesh};
use crate::{Error, Result};

/// Distances from one source to a set of targets. Targets farther than the
/// cutoff, or on another connected component, map to `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicResult {
    pub source: u32,
    pub distances: BTreeMap<u32, f64>,
}

impl GeodesicResult {
    pub fn get(&self, target: u32) -> Option<f64> {
        self.distances.get(&target).copied()
    }
}

/// Immutable mesh topology prepared for geodesic queries. Share one instance
/// across threads; each thread runs its own [`GeodesicSolver`].
#[derive(Debug, Clone)]
pub struct GeodesicMesh {
    pub(crate) positions: Vec<Point>,
    pub(crate) faces: Vec<[u32; 3]>,
    pub(crate) edge_faces: std::collections::HashMap<EdgeKey, Vec<u32>>,
    pub(crate) vertex_faces: Vec<Vec<u32>>,
    /// Saddle, boundary, or non-manifold vertices: geodesics may bend here.
    pub(crate) pseudo_source: Vec<bool>,
    pub(crate) component: Vec<u32>,
}

/// Angle-sum excess above which an interior vertex counts as a saddle.
const SADDLE_EPS: f64 = 1e-6;

impl GeodesicMesh {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        mesh.validate()?;
        for (fi, f) in mesh.faces.iter().enumerate() {
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] || mesh.face_area(fi) == 0.0 {
                return Err(Error::Degenerate(format!("face {fi} has zero area")));
            }
        }
        let n = mesh.vertex_count();
        let edge_faces = mesh.edge_faces().clone();
        let vertex_faces = mesh.vertex_faces();
        let mut angle = vec![0.0f64; n];
        for f in &mesh.faces {
            for k in 0..3 {
                let (v, a, b) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
                let p = mesh.vertices[v as usize];
                let ea = mesh.vertices[a as usize] - p;
                let eb = mesh.vertices[b as usize] - p;
                angle[v as usize] += ea.angle(&eb);
            }
        }
        let mut pseudo_source: Vec<bool> = angle
            .iter()
            .map(|&a| a > std::f64::consts::TAU + SADDLE_EPS)
            .collect();
        for (e, fs) in &edge_faces {
            if fs.len() != 2 {
                pseudo_source[e.lo() as usize] = true;
                pseudo_source[e.hi() as usize] = true;
            }
        }

        // Connected components over face adjacency.
        let mut component = vec![u32::MAX; n];
        let mut next = 0u32;
        for start in 0..n {
            if component[start] != u32::MAX {
                continue;
            }
            component[start] = next;
            let mut stack = vec![start as u32];
            while let Some(v) = stack.pop() {
                for &f in &vertex_faces[v as usize] {
                    for &w in &mesh.faces[f as usize] {
                        if component[w as usize] == u32::MAX {
                            component[w as usize] = next;
                            stack.push(w);
                        }
                    }
                }
            }
            next += 1;
        }

        Ok(GeodesicMesh {
            positions: mesh.vertices.clone(),
            faces: mesh.faces.clone(),
            edge_faces,
            vertex_faces,
            pseudo_source,
            component,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, v: u32) -> Point {
        self.positions[v as usize]
    }

    pub fn same_component(&self, a: u32, b: u32) -> bool {
        self.component[a as usize] == self.component[b as usize]
    }

    pub fn is_pseudo_source(&self, v: u32) -> bool {
        self.pseudo_source[v as usize]
    }
}

/// Exact geodesic distances from `source` to each target within `cutoff`.
pub fn local_geodesics(mesh: &GeodesicMesh, source: u32, targets: &[u32], cutoff: f64) -> Result<GeodesicResult> {
    GeodesicSolver::new(mesh).solve(source, targets, cutoff)
}
