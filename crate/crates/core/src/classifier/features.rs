//! Rigid- and scale-invariant local features of a candidate triangle.
//!
//! Lengths are divided by the cloud's mean nearest-neighbor distance `s`.
//! Vertices are ordered by the length of their opposite edge (ties by index).
//! Layout of the 60 entries:
//!
//! | range  | content                                                        |
//! |--------|----------------------------------------------------------------|
//! | 0..3   | edge lengths, ascending                                        |
//! | 3      | area / s²                                                      |
//! | 4      | shape quality 4√3·area / Σ edge²  (1 for equilateral)          |
//! | 5..29  | per vertex: distances to its 8 nearest neighbors               |
//! | 29..32 | per vertex: abs cosine between face normal and patch normal    |
//! | 32..35 | per vertex: (above − below) / (above + below) neighbor counts  |
//! | 35..41 | per vertex: smallest and middle patch eigenvalue over the sum  |
//! | 41..44 | per vertex: mean distance of the other two corners to its patch plane |
//! | 44..47 | per vertex: fraction of its k neighbors within the longest edge |
//! | 47..50 | interior angles in radians, ascending                          |
//! | 50..53 | per edge: 1 if mutual neighbors, 0.5 if one-way, else 0; ascending |
//! | 53..56 | per edge: shared-neighbor fraction, ascending                  |
//! | 56     | perimeter                                                      |
//! | 57     | smallest of the three normal cosines                           |
//! | 58     | mean absolute density asymmetry                                |
//! | 59     | longest edge over the mean k-th neighbor distance of the corners |
//!
//! The patch of a point is itself plus its 16 nearest neighbors. Density
//! asymmetry counts the point's k neighbors inside a ball of radius
//! 1.5 × longest edge, split by the candidate plane.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::candidates::{CandidateTriangle, KnnGraph};
use crate::geom::{triangle_area, unit_normal, Point, Vector};
use crate::{Error, Result};

pub const FEATURE_DIM: usize = 60;
const NN_DISTANCES: usize = 8;
const PATCH_SIZE: usize = 16;
const BALL_FACTOR: f64 = 1.5;

pub type FeatureVector = [f64; FEATURE_DIM];

#[derive(Debug, Clone, Copy)]
struct Patch {
    normal: Vector,
    center: Point,
    /// Eigenvalues ascending, divided by their sum.
    ratios: [f64; 2],
}

/// Per-point data shared by all candidates of one cloud.
#[derive(Debug, Clone)]
pub struct FeatureContext<'a> {
    points: &'a [Point],
    knn: &'a KnnGraph,
    scale: f64,
    patches: Vec<Patch>,
    sorted_neighbors: Vec<Vec<u32>>,
}

fn patch_of(points: &[Point], center: u32, neighbors: &[u32]) -> Patch {
    let ids: Vec<u32> = std::iter::once(center)
        .chain(neighbors.iter().take(PATCH_SIZE).copied())
        .collect();
    let n = ids.len() as f64;
    let mean = ids.iter().fold(Vector::zeros(), |acc, &i| acc + points[i as usize].coords) / n;
    let mut cov = Matrix3::zeros();
    for &i in &ids {
        let d = points[i as usize].coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.map(|i| eig.eigenvalues[i].max(0.0));
    let sum = vals.iter().sum::<f64>();
    let ratios = if sum > 0.0 { [vals[0] / sum, vals[1] / sum] } else { [0.0, 0.0] };
    Patch {
        normal: eig.eigenvectors.column(order[0]).into_owned(),
        center: Point::from(mean),
        ratios,
    }
}

impl<'a> FeatureContext<'a> {
    pub fn new(points: &'a [Point], knn: &'a KnnGraph) -> Result<Self> {
        if knn.len() != points.len() {
            return Err(Error::Dimension(format!(
                "k-NN graph has {} rows for {} points",
                knn.len(),
                points.len()
            )));
        }
        if points.is_empty() || knn.k == 0 {
            return Err(Error::invalid("feature extraction needs a non-empty k-NN graph"));
        }
        let scale = knn.distances.iter().map(|d| d[0]).sum::<f64>() / points.len() as f64;
        if !(scale > 0.0) {
            return Err(Error::Degenerate("mean nearest-neighbor distance is zero".into()));
        }
        let patches = (0..points.len())
            .into_par_iter()
            .map(|i| patch_of(points, i as u32, &knn.neighbors[i]))
            .collect();
        let sorted_neighbors = knn
            .neighbors
            .iter()
            .map(|ns| {
                let mut s = ns.clone();
                s.sort_unstable();
                s
            })
            .collect();
        Ok(FeatureContext {
            points,
            knn,
            scale,
            patches,
            sorted_neighbors,
        })
    }

    /// Mean nearest-neighbor distance used to scale lengths.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn is_neighbor(&self, a: u32, b: u32) -> bool {
        self.sorted_neighbors[a as usize].binary_search(&b).is_ok()
    }

    fn shared_fraction(&self, a: u32, b: u32) -> f64 {
        let (x, y) = (&self.sorted_neighbors[a as usize], &self.sorted_neighbors[b as usize]);
        let (mut i, mut j, mut n) = (0, 0, 0usize);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n as f64 / self.knn.k as f64
    }

    /// Signed above/below neighbor balance of `v` against the plane through
    /// `origin` with unit normal `n`.
    fn asymmetry(&self, v: u32, origin: &Point, n: &Vector, radius: f64) -> f64 {
        let eps = 1e-6 * self.scale;
        let (mut above, mut below) = (0usize, 0usize);
        for (&j, &d) in self.knn.neighbors[v as usize].iter().zip(&self.knn.distances[v as usize]) {
            if d > radius {
                break;
            }
            let h = n.dot(&(self.points[j as usize] - origin));
            if h > eps {
                above += 1;
            } else if h < -eps {
                below += 1;
            }
        }
        if above + below == 0 {
            0.0
        } else {
            (above as f64 - below as f64) / (above + below) as f64
        }
    }

    /// Features of the triangle with the given vertices.
    pub fn extract(&self, verts: [u32; 3]) -> Result<FeatureVector> {
        let n_pts = self.points.len() as u32;
        if let Some(&v) = verts.iter().find(|&&v| v >= n_pts) {
            return Err(Error::invalid(format!("candidate vertex {v} out of range ({n_pts} points)")));
        }
        let s = self.scale;
        let pos = |v: u32| self.points[v as usize];
        let opposite = |k: usize| (pos(verts[(k + 1) % 3]) - pos(verts[(k + 2) % 3])).norm();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| opposite(a).total_cmp(&opposite(b)).then(verts[a].cmp(&verts[b])));
        let vs = order.map(|k| verts[k]);
        let [a, b, c] = vs.map(pos);
        let normal = unit_normal(&a, &b, &c)
            .ok_or_else(|| Error::Degenerate(format!("candidate {verts:?} has zero area")))?;
        let mut edges = [opposite(0), opposite(1), opposite(2)];
        edges.sort_by(f64::total_cmp);
        let longest = edges[2];
        let area = triangle_area(&a, &b, &c);

        let mut f = [0.0f64; FEATURE_DIM];
        for k in 0..3 {
            f[k] = edges[k] / s;
        }
        f[3] = area / (s * s);
        f[4] = 4.0 * 3f64.sqrt() * area / edges.iter().map(|e| e * e).sum::<f64>();

        let mut cosines = [0.0; 3];
        let mut asym = [0.0; 3];
        for (slot, &v) in vs.iter().enumerate() {
            let ds = &self.knn.distances[v as usize];
            for m in 0..NN_DISTANCES {
                let d = ds.get(m).or(ds.last()).copied().unwrap_or(0.0);
                f[5 + slot * NN_DISTANCES + m] = d / s;
            }
            let patch = &self.patches[v as usize];
            cosines[slot] = normal.dot(&patch.normal).abs().min(1.0);
            f[29 + slot] = cosines[slot];
            asym[slot] = self.asymmetry(v, &a, &normal, BALL_FACTOR * longest);
            f[32 + slot] = asym[slot];
            f[35 + 2 * slot] = patch.ratios[0];
            f[36 + 2 * slot] = patch.ratios[1];
            let others = vs.iter().filter(|&&w| w != v);
            f[41 + slot] = others
                .map(|&w| patch.normal.dot(&(pos(w) - patch.center)).abs())
                .sum::<f64>()
                / (2.0 * s);
            f[44 + slot] = ds.iter().take_while(|&&d| d <= longest).count() as f64 / self.knn.k as f64;
        }

        let mut angles = [0usize, 1, 2].map(|k| {
            let p = pos(vs[k]);
            (pos(vs[(k + 1) % 3]) - p).angle(&(pos(vs[(k + 2) % 3]) - p))
        });
        angles.sort_by(f64::total_cmp);
        f[47..50].copy_from_slice(&angles);

        let pairs = [(vs[0], vs[1]), (vs[0], vs[2]), (vs[1], vs[2])];
        let mut mutual = pairs.map(|(x, y)| 0.5 * (self.is_neighbor(x, y) as u8 + self.is_neighbor(y, x) as u8) as f64);
        mutual.sort_by(f64::total_cmp);
        f[50..53].copy_from_slice(&mutual);
        let mut shared = pairs.map(|(x, y)| self.shared_fraction(x, y));
        shared.sort_by(f64::total_cmp);
        f[53..56].copy_from_slice(&shared);

        f[56] = edges.iter().sum::<f64>() / s;
        f[57] = cosines.iter().copied().fold(f64::INFINITY, f64::min);
        f[58] = asym.iter().map(|x| x.abs()).sum::<f64>() / 3.0;
        let reach = vs
            .iter()
            .map(|&v| *self.knn.distances[v as usize].last().unwrap())
            .sum::<f64>()
            / 3.0;
        f[59] = longest / reach;
        Ok(f)
    }

    /// Features for every candidate, in order.
    pub fn extract_all(&self, candidates: &[CandidateTriangle]) -> Result<Vec<FeatureVector>> {
        candidates.par_iter().map(|c| self.extract(c.verts)).collect()
    }
}
