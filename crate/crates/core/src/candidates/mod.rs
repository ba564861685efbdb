//! k-NN graph, candidate triangle proposal, IER and ground-truth labels.

mod dump;

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geodesics::{GeodesicMesh, GeodesicSolver};
use crate::geom::{triangle_area, Point};
use crate::rng::item_rng;
use crate::spatial::{DistanceGrid, KdTree, TriangleBvh};
use crate::{Error, Result};

pub use dump::{read_candidates, read_candidates_csv, write_candidates, write_candidates_csv, DUMP_VERSION};

/// Triples with area below this are dropped as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Candidate class: 0 incorrect, 1 near the surface, 2 correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Label {
    Incorrect = 0,
    NearSurface = 1,
    Correct = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Incorrect, Label::NearSurface, Label::Correct];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }
}

/// Labeling thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelingParams {
    pub tau: f64,
    pub dist_thresh: f64,
    pub n_face_samples: usize,
}

impl LabelingParams {
    /// Number of bins on the correct side of the IER threshold.
    pub const BINS: usize = 2;

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) || !self.tau.is_finite() {
            return Err(Error::invalid(format!("tau must be a finite value > 1, got {}", self.tau)));
        }
        if !(self.dist_thresh > 0.0) || !self.dist_thresh.is_finite() {
            return Err(Error::invalid(format!("distance threshold must be positive, got {}", self.dist_thresh)));
        }
        if self.n_face_samples == 0 {
            return Err(Error::invalid("need at least one face sample per candidate"));
        }
        Ok(())
    }
}

impl Default for LabelingParams {
    fn default() -> Self {
        LabelingParams {
            tau: 1.3,
            dist_thresh: 0.005,
            n_face_samples: 10,
        }
    }
}

/// Distinct positions of a cloud. Exact duplicates collapse onto their first
/// occurrence; unique indices follow first-occurrence order, so mapping back
/// preserves ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct UniquePoints {
    pub points: Vec<Point>,
    /// Unique index of each original point.
    pub unique_of: Vec<u32>,
    /// First original index of each unique point.
    pub original_of: Vec<u32>,
}

impl UniquePoints {
    pub fn new(points: &[Point]) -> Self {
        let key = |p: &Point| p.coords.map(|c| if c == 0.0 { 0u64 } else { c.to_bits() });
        let mut seen: HashMap<_, u32> = HashMap::with_capacity(points.len());
        let mut out = UniquePoints {
            points: Vec::new(),
            unique_of: Vec::with_capacity(points.len()),
            original_of: Vec::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let next = out.points.len() as u32;
            let u = *seen.entry(key(p)).or_insert(next);
            if u == next {
                out.points.push(*p);
                out.original_of.push(i as u32);
            }
            out.unique_of.push(u);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Maps a unique-index triple to original indices, keeping ascending order.
    pub fn to_original(&self, t: [u32; 3]) -> [u32; 3] {
        t.map(|u| self.original_of[u as usize])
    }
}

/// Exact k nearest neighbors of every point.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub k: usize,
    /// Per point: neighbor indices sorted by (distance, index).
    pub neighbors: Vec<Vec<u32>>,
    /// Euclidean distances matching `neighbors`.
    pub distances: Vec<Vec<f64>>,
}

impl KnnGraph {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Whether `b` is among the neighbors of `a`.
    pub fn has_neighbor(&self, a: u32, b: u32) -> bool {
        self.neighbors[a as usize].contains(&b)
    }
}

/// Builds the k-NN graph. Points must be distinct; see [`UniquePoints`].
pub fn build_knn(points: &[Point], k: usize) -> Result<KnnGraph> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if points.len() <= k {
        return Err(Error::invalid(format!(
            "need more than k = {k} distinct points, got {}",
            points.len()
        )));
    }
    let tree = KdTree::new(points);
    let rows: Vec<Vec<(u32, f64)>> = (0..points.len())
        .into_par_iter()
        .map(|i| tree.knn(&points[i], k, Some(i as u32)))
        .collect();
    let mut graph = KnnGraph {
        k,
        neighbors: Vec::with_capacity(points.len()),
        distances: Vec::with_capacity(points.len()),
    };
    for (i, row) in rows.into_iter().enumerate() {
        if row.first().is_some_and(|&(_, d2)| d2 == 0.0) {
            return Err(Error::invalid(format!(
                "point {i} coincides with point {}; deduplicate first",
                row[0].0
            )));
        }
        graph.neighbors.push(row.iter().map(|&(j, _)| j).collect());
        graph.distances.push(row.iter().map(|&(_, d2)| d2.sqrt()).collect());
    }
    Ok(graph)
}

/// A potential output face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateTriangle {
    /// Ascending vertex indices.
    pub verts: [u32; 3],
    pub longest_edge: f64,
    pub ier: Option<f64>,
    pub dist_to_ref: Option<f64>,
    pub label: Option<Label>,
}

impl CandidateTriangle {
    pub fn new(verts: [u32; 3], points: &[Point]) -> Self {
        let [a, b, c] = verts.map(|v| points[v as usize]);
        let longest_edge = (a - b).norm().max((a - c).norm()).max((b - c).norm());
        CandidateTriangle {
            verts,
            longest_edge,
            ier: None,
            dist_to_ref: None,
            label: None,
        }
    }

    pub fn corners(&self, points: &[Point]) -> [Point; 3] {
        self.verts.map(|v| points[v as usize])
    }
}

fn sorted3(mut t: [u32; 3]) -> [u32; 3] {
    t.sort_unstable();
    t
}

/// Every point with every pair of its neighbors, as unique ascending triples
/// sorted lexicographically. Degenerate triples are skipped.
pub fn propose_candidates(knn: &KnnGraph, points: &[Point]) -> Vec<CandidateTriangle> {
    let sorted: Vec<Vec<u32>> = knn
        .neighbors
        .iter()
        .map(|ns| {
            let mut s = ns.clone();
            s.sort_unstable();
            s
        })
        .collect();
    let proposes = |q: u32, x: u32, y: u32| {
        let s = &sorted[q as usize];
        s.binary_search(&x).is_ok() && s.binary_search(&y).is_ok()
    };
    let mut out: Vec<CandidateTriangle> = (0..points.len() as u32)
        .into_par_iter()
        .flat_map_iter(|p| {
            let ns = &knn.neighbors[p as usize];
            let mut local = Vec::new();
            for i in 0..ns.len() {
                for j in i + 1..ns.len() {
                    let (a, b) = (ns[i], ns[j]);
                    // Emit only from the smallest vertex that proposes this triple.
                    if (a < p && proposes(a, p, b)) || (b < p && proposes(b, p, a)) {
                        continue;
                    }
                    let t = sorted3([p, a, b]);
                    let [x, y, z] = t.map(|v| points[v as usize]);
                    if triangle_area(&x, &y, &z) < DEGENERATE_AREA {
                        continue;
                    }
                    local.push(CandidateTriangle::new(t, points));
                }
            }
            local
        })
        .collect();
    out.par_sort_unstable_by_key(|c| c.verts);
    out
}

/// Pair IER: geodesic over Euclidean distance.
pub fn ier_pair(d_g: f64, d_e: f64) -> Result<f64> {
    if !(d_e > 0.0) {
        return Err(Error::invalid(format!("Euclidean distance must be positive, got {d_e}")));
    }
    Ok(if d_g.is_infinite() { f64::INFINITY } else { d_g / d_e })
}

/// Triangle IER: sum of the three geodesic distances over the sum of the
/// three Euclidean distances.
pub fn ier_triangle(d_g: [f64; 3], d_e: [f64; 3]) -> Result<f64> {
    if let Some(d) = d_e.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::invalid(format!("Euclidean distance must be positive, got {d}")));
    }
    if d_g.iter().any(|d| d.is_infinite()) {
        return Ok(f64::INFINITY);
    }
    Ok(d_g.iter().sum::<f64>() / d_e.iter().sum::<f64>())
}

/// Mean of `distance` over `n_samples` uniform points on the triangle.
pub fn candidate_dist_to_mesh(
    corners: &[Point; 3],
    distance: impl Fn(&Point) -> f64,
    n_samples: usize,
    rng: &mut impl Rng,
) -> f64 {
    let [a, b, c] = corners;
    let mut sum = 0.0;
    for _ in 0..n_samples {
        let s = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        let p = Point::from(a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2));
        sum += distance(&p);
    }
    sum / n_samples as f64
}

/// The class of a candidate from its IER and reference distance.
pub fn label_for(ier: f64, dist_to_ref: f64, params: &LabelingParams) -> Label {
    if ier >= params.tau {
        Label::Incorrect
    } else if dist_to_ref <= params.dist_thresh {
        Label::NearSurface
    } else {
        Label::Correct
    }
}

/// Labels candidates whose IER and reference distance are already set.
pub fn label_candidates(candidates: &mut [CandidateTriangle], params: &LabelingParams) -> Result<()> {
    for c in candidates.iter_mut() {
        let (Some(ier), Some(d)) = (c.ier, c.dist_to_ref) else {
            return Err(Error::invalid(format!("candidate {:?} lacks an IER or reference distance", c.verts)));
        };
        c.label = Some(label_for(ier, d, params));
    }
    Ok(())
}

/// Geodesic distances for every vertex pair used by some candidate, stored
/// under the smaller index.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGeodesics {
    rows: Vec<Vec<(u32, f64)>>,
}

impl PairGeodesics {
    pub fn get(&self, a: u32, b: u32) -> Option<f64> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let row = self.rows.get(lo as usize)?;
        row.binary_search_by_key(&hi, |&(t, _)| t).ok().map(|i| row[i].1)
    }

    pub fn pair_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// Candidate vertex pairs `(u, v)` with `u < v`, grouped by `u`.
pub fn candidate_pairs(candidates: &[CandidateTriangle], n_points: usize) -> Vec<Vec<u32>> {
    let mut rows = vec![Vec::new(); n_points];
    for c in candidates {
        let [a, b, d] = c.verts;
        rows[a as usize].push(b);
        rows[a as usize].push(d);
        rows[b as usize].push(d);
    }
    rows.par_iter_mut().for_each(|r| {
        r.sort_unstable();
        r.dedup();
    });
    rows
}

/// Geodesic distances between the surface vertices `vertex_of[u]` and
/// `vertex_of[v]` for every candidate pair. Each source propagates up to
/// `cutoff_multiplier` times its farthest partner's Euclidean distance;
/// pairs beyond that report `+inf`.
pub fn pair_geodesics(
    mesh: &GeodesicMesh,
    vertex_of: &[u32],
    candidates: &[CandidateTriangle],
    cutoff_multiplier: f64,
) -> Result<PairGeodesics> {
    if !(cutoff_multiplier >= 1.0) {
        return Err(Error::invalid(format!("cutoff multiplier must be at least 1, got {cutoff_multiplier}")));
    }
    let pairs = candidate_pairs(candidates, vertex_of.len());
    let rows = pairs
        .par_iter()
        .enumerate()
        .map_init(
            || GeodesicSolver::new(mesh),
            |solver, (u, partners)| -> Result<Vec<(u32, f64)>> {
                if partners.is_empty() {
                    return Ok(Vec::new());
                }
                let src = vertex_of[u];
                let ps = mesh.position(src);
                let targets: Vec<u32> = partners.iter().map(|&v| vertex_of[v as usize]).collect();
                let reach = targets
                    .iter()
                    .map(|&t| (mesh.position(t) - ps).norm())
                    .fold(0.0f64, f64::max);
                let cutoff = (cutoff_multiplier * reach).max(f64::MIN_POSITIVE);
                let res = solver.solve(src, &targets, cutoff)?;
                Ok(partners
                    .iter()
                    .zip(&targets)
                    .map(|(&v, &t)| (v, res.get(t).unwrap_or(f64::INFINITY)))
                    .collect())
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(PairGeodesics { rows })
}

/// Sets each candidate's IER from pair geodesics and point positions.
pub fn assign_ier(candidates: &mut [CandidateTriangle], geodesics: &PairGeodesics, points: &[Point]) -> Result<()> {
    candidates.par_iter_mut().try_for_each(|c| {
        let [a, b, d] = c.verts;
        let pairs = [(a, b), (a, d), (b, d)];
        let d_g = pairs.map(|(x, y)| geodesics.get(x, y).unwrap_or(f64::INFINITY));
        let d_e = pairs.map(|(x, y)| (points[x as usize] - points[y as usize]).norm());
        c.ier = Some(ier_triangle(d_g, d_e)?);
        Ok(())
    })
}

/// Sets each candidate's mean distance to the reference surface. Sampling is
/// keyed by the vertex triple, so results do not depend on candidate order.
pub fn assign_dist_to_ref(
    candidates: &mut [CandidateTriangle],
    points: &[Point],
    reference: &TriangleBvh,
    n_samples: usize,
    stage_seed: u64,
) {
    if candidates.is_empty() {
        return;
    }
    let mean_edge = candidates.iter().map(|c| c.longest_edge).sum::<f64>() / candidates.len() as f64;
    let grid = DistanceGrid::new(reference, 0.1 * mean_edge, 0.5 * mean_edge);
    candidates.par_iter_mut().for_each(|c| {
        let [a, b, d] = c.verts.map(u64::from);
        let key = a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f) ^ d.rotate_left(29);
        let mut rng = item_rng(stage_seed, key);
        c.dist_to_ref = Some(candidate_dist_to_mesh(&c.corners(points), |p| grid.distance(p), n_samples, &mut rng));
    });
}
