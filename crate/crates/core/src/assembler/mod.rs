//! Greedy assembly of sorted candidates into a manifold, self-intersection
//! free mesh.

mod grid;
mod intersect;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::candidates::{CandidateTriangle, Label};
use crate::geom::{Aabb, Point};
use crate::mesh::{face_edges, EdgeKey, TriangleMesh};
use crate::{Error, Result};

use grid::TriangleGrid;
pub use intersect::{triangles_fold, triangles_intersect, Tri};

/// Intersection tolerance relative to the bounding-box diagonal.
pub const INTERSECT_REL_EPS: f64 = 1e-9;

/// Default for [`AssemblyRules::fold_angle`], in degrees.
pub const FOLD_ANGLE_DEG: f64 = 40.0;

/// Acceptance tests beyond edge manifoldness and intersection.
///
/// Both extras are on by default. With edges and intersections alone, sheets
/// of chord faces stack up under convex regions and around holes: they cross
/// nothing and each brings new long edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyRules {
    /// Reject a face that would leave a vertex with a closed fan plus other
    /// faces. Several open fans per vertex stay allowed while patches grow.
    pub vertex_manifold: bool,
    /// Reject a face that folds over an accepted face sharing a vertex or an
    /// edge, with planes within this many radians.
    pub fold_angle: Option<f64>,
}

impl Default for AssemblyRules {
    fn default() -> Self {
        AssemblyRules {
            vertex_manifold: true,
            fold_angle: Some(FOLD_ANGLE_DEG.to_radians()),
        }
    }
}

impl AssemblyRules {
    /// Only edge manifoldness and intersection.
    pub fn edges_only() -> Self {
        AssemblyRules {
            vertex_manifold: false,
            fold_angle: None,
        }
    }
}

/// Visiting order of a candidate: bin, then longest edge, then vertex triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SortKey {
    pub bin: u8,
    pub longest_edge: f64,
    pub verts: [u32; 3],
}

impl Eq for SortKey {}

impl Ord for SortKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bin
            .cmp(&other.bin)
            .then(self.longest_edge.total_cmp(&other.longest_edge))
            .then(self.verts.cmp(&other.verts))
    }
}

impl PartialOrd for SortKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Where a candidate's bin comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinSource {
    /// Label 1 goes to bin 0 and label 2 to bin 1. Label 0 is an error.
    Label,
    /// Bin 0 when the reference distance is at most the threshold, else bin 1.
    RefDistance(f64),
}

/// Candidates in visiting order.
pub fn sort_candidates(candidates: &[CandidateTriangle], source: BinSource) -> Result<Vec<SortKey>> {
    let mut keys = candidates
        .iter()
        .map(|c| {
            let bin = match source {
                BinSource::Label => match c.label {
                    Some(Label::NearSurface) => 0,
                    Some(Label::Correct) => 1,
                    other => {
                        return Err(Error::invalid(format!(
                            "candidate {:?} has label {other:?}; filter incorrect candidates before sorting",
                            c.verts
                        )))
                    }
                },
                BinSource::RefDistance(t) => match c.dist_to_ref {
                    Some(d) => u8::from(d > t),
                    None => return Err(Error::invalid(format!("candidate {:?} has no reference distance", c.verts))),
                },
            };
            Ok(SortKey {
                bin,
                longest_edge: c.longest_edge,
                verts: c.verts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    keys.sort_unstable();
    Ok(keys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    Intersection,
    NonManifold,
    /// Would give a vertex a closed fan alongside other faces.
    NonManifoldVertex,
    /// Lies folded over an accepted neighbour.
    Fold,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Intersection => "intersection",
            RejectReason::NonManifold => "non-manifold",
            RejectReason::NonManifoldVertex => "non-manifold-vertex",
            RejectReason::Fold => "fold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rejection {
    pub verts: [u32; 3],
    pub reason: RejectReason,
}

/// Accepted faces plus the bookkeeping needed to test the next candidate.
#[derive(Debug, Clone)]
pub struct AssemblyState<'a> {
    points: &'a [Point],
    eps: f64,
    faces: Vec<[u32; 3]>,
    edge_count: HashMap<EdgeKey, u8>,
    grid: TriangleGrid,
    rejections: Vec<Rejection>,
    vertex_faces: Vec<Vec<u32>>,
    rules: AssemblyRules,
}

impl<'a> AssemblyState<'a> {
    /// `cell` sizes the spatial grid; a typical candidate edge length works.
    pub fn new(points: &'a [Point], cell: f64) -> Self {
        let diag = Aabb::from_points(points).diagonal();
        AssemblyState {
            points,
            eps: INTERSECT_REL_EPS * diag,
            faces: Vec::new(),
            edge_count: HashMap::new(),
            grid: TriangleGrid::new(cell),
            rejections: Vec::new(),
            vertex_faces: vec![Vec::new(); points.len()],
            rules: AssemblyRules::default(),
        }
    }

    pub fn with_rules(mut self, rules: AssemblyRules) -> Self {
        self.rules = rules;
        self
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn rejections(&self) -> &[Rejection] {
        &self.rejections
    }

    fn tri(&self, verts: [u32; 3]) -> Tri {
        Tri::new(verts, verts.map(|v| self.points[v as usize]))
    }

    /// Whether `v` keeps a manifold link after adding `verts`. The link may
    /// be several open fans while the surface grows, but a closed fan must be
    /// the only one.
    fn fan_ok(&self, v: u32, verts: [u32; 3]) -> bool {
        let opposite = |f: [u32; 3]| -> (u32, u32) {
            let i = f.iter().position(|&x| x == v).unwrap();
            (f[(i + 1) % 3], f[(i + 2) % 3])
        };
        let mut edges: Vec<(u32, u32)> = self.vertex_faces[v as usize]
            .iter()
            .map(|&f| opposite(self.faces[f as usize]))
            .collect();
        edges.push(opposite(verts));
        let mut nodes: Vec<u32> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let idx = |x: u32| nodes.binary_search(&x).unwrap();
        let mut parent: Vec<usize> = (0..nodes.len()).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for &(a, b) in &edges {
            let (ra, rb) = (root(&mut parent, idx(a)), root(&mut parent, idx(b)));
            parent[ra] = rb;
        }
        // Per component: (nodes, edges). Degrees are at most two once the
        // edge check has passed, so a component is a cycle iff counts match.
        let mut comp: HashMap<usize, (usize, usize)> = HashMap::new();
        for i in 0..nodes.len() {
            comp.entry(root(&mut parent, i)).or_default().0 += 1;
        }
        for &(a, _) in &edges {
            comp.entry(root(&mut parent, idx(a))).or_default().1 += 1;
        }
        comp.len() == 1 || comp.values().all(|&(n, e)| e < n)
    }

    /// Why `verts` cannot be added now, if anything.
    pub fn check(&mut self, verts: [u32; 3]) -> Result<Option<RejectReason>> {
        let n = self.points.len() as u32;
        if verts.iter().any(|&v| v >= n) || verts[0] == verts[1] || verts[1] == verts[2] || verts[0] == verts[2] {
            return Err(Error::invalid(format!("bad candidate {verts:?} for {n} points")));
        }
        if face_edges(&verts)
            .iter()
            .any(|e| self.edge_count.get(e).copied().unwrap_or(0) >= 2)
        {
            return Ok(Some(RejectReason::NonManifold));
        }
        if self.rules.vertex_manifold && verts.iter().any(|&v| !self.fan_ok(v, verts)) {
            return Ok(Some(RejectReason::NonManifoldVertex));
        }
        let t = self.tri(verts);
        let b = Aabb::from_points(&t.p).expanded(self.eps);
        let near: Vec<Tri> = self.grid.query(&b).into_iter().map(|id| self.tri(self.faces[id as usize])).collect();
        for other in &near {
            if triangles_intersect(&t, other, self.eps)? {
                return Ok(Some(RejectReason::Intersection));
            }
        }
        if let Some(a) = self.rules.fold_angle {
            if near.iter().any(|other| triangles_fold(&t, other, a)) {
                return Ok(Some(RejectReason::Fold));
            }
        }
        Ok(None)
    }

    /// Adds `verts` if allowed, otherwise logs the rejection. Returns whether
    /// it was accepted.
    pub fn offer(&mut self, verts: [u32; 3]) -> Result<bool> {
        match self.check(verts)? {
            Some(reason) => {
                self.rejections.push(Rejection { verts, reason });
                Ok(false)
            }
            None => {
                for e in face_edges(&verts) {
                    *self.edge_count.entry(e).or_insert(0) += 1;
                }
                let p = verts.map(|v| self.points[v as usize]);
                self.grid.insert(Aabb::from_points(&p));
                for &v in &verts {
                    self.vertex_faces[v as usize].push(self.faces.len() as u32);
                }
                self.faces.push(verts);
                Ok(true)
            }
        }
    }
}

/// Result of a greedy pass.
#[derive(Debug, Clone)]
pub struct Assembly {
    /// All input points as vertices, accepted candidates as faces.
    pub mesh: TriangleMesh,
    pub rejections: Vec<Rejection>,
    /// Whether each vertex is used by some face.
    pub referenced: Vec<bool>,
}

impl Assembly {
    pub fn unreferenced_count(&self) -> usize {
        self.referenced.iter().filter(|r| !**r).count()
    }
}

/// Visits `order` once, accepting each candidate that keeps every edge at
/// most two faces and crosses no accepted face, under the default rules.
pub fn merge(order: &[SortKey], points: &[Point]) -> Result<Assembly> {
    merge_with(order, points, AssemblyRules::default())
}

pub fn merge_with(order: &[SortKey], points: &[Point], rules: AssemblyRules) -> Result<Assembly> {
    let cell = if order.is_empty() {
        1.0
    } else {
        order.iter().map(|k| k.longest_edge).sum::<f64>() / order.len() as f64
    };
    let mut state = AssemblyState::new(points, cell).with_rules(rules);
    for k in order {
        state.offer(k.verts)?;
    }
    let mut referenced = vec![false; points.len()];
    for f in &state.faces {
        for &v in f {
            referenced[v as usize] = true;
        }
    }
    Ok(Assembly {
        mesh: TriangleMesh::new(points.to_vec(), state.faces)?,
        rejections: state.rejections,
        referenced,
    })
}

/// Writes rejections as CSV rows `v0,v1,v2,reason`.
pub fn write_rejections_csv<W: Write>(mut w: W, rejections: &[Rejection]) -> Result<()> {
    writeln!(w, "v0,v1,v2,reason")?;
    for r in rejections {
        writeln!(w, "{},{},{},{}", r.verts[0], r.verts[1], r.verts[2], r.reason.as_str())?;
    }
    w.flush()?;
    Ok(())
}

/// All pairs of faces that intersect under [`triangles_intersect`], by
/// exhaustive comparison with a bounding-box prefilter.
pub fn brute_force_intersections(mesh: &TriangleMesh) -> Result<Vec<(u32, u32)>> {
    let eps = INTERSECT_REL_EPS * mesh.bounding_box().diagonal();
    let tris: Vec<Tri> = (0..mesh.face_count())
        .map(|f| Tri::new(mesh.faces[f], mesh.corners(f)))
        .collect();
    let boxes: Vec<Aabb> = tris.iter().map(|t| Aabb::from_points(&t.p).expanded(eps)).collect();
    let rows = (0..tris.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<(u32, u32)>> {
            let mut hits = Vec::new();
            for j in i + 1..tris.len() {
                if boxes[i].overlaps(&boxes[j]) && triangles_intersect(&tris[i], &tris[j], eps)? {
                    hits.push((i as u32, j as u32));
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests;
