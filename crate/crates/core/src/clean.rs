//! Mesh cleaning: vertex welding, duplicate-face removal and T-junction splitting.

use std::collections::{HashMap, HashSet};

use crate::geom::{point_segment_distance, Point};
use crate::mesh::{face_edges, EdgeKey, TriangleMesh};
use crate::Result;

/// Relative tolerance (times the bounding-box diagonal) for a vertex lying on an edge.
pub const EDGE_SPLIT_REL_TOL: f64 = 1e-6;

const MAX_PASSES: usize = 32;

/// Welds vertices closer than `merge_eps`, drops faces that collapse or
/// duplicate another face, and splits edges that pass through other vertices.
///
/// Vertex order is preserved: each welded group takes the slot of its
/// lowest-index member and moves to the group centroid.
pub fn clean_mesh(mesh: &TriangleMesh, merge_eps: f64) -> Result<TriangleMesh> {
    mesh.validate()?;
    let mut vertices = mesh.vertices.clone();
    let mut faces = mesh.faces.clone();
    let diag = mesh.bounding_box().diagonal();
    let split_tol = EDGE_SPLIT_REL_TOL * diag;

    for _ in 0..MAX_PASSES {
        let mut changed = false;
        if merge_eps > 0.0 {
            if let Some((v, remap)) = weld_vertices(&vertices, merge_eps) {
                vertices = v;
                for f in &mut faces {
                    for i in f.iter_mut() {
                        *i = remap[*i as usize];
                    }
                }
                changed = true;
            }
        }
        let before = faces.len();
        faces = dedup_faces(faces);
        changed |= faces.len() != before;
        if split_tol > 0.0 {
            changed |= split_t_junctions(&vertices, &mut faces, split_tol);
        }
        if !changed {
            break;
        }
    }
    Ok(TriangleMesh::from_parts(vertices, faces))
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    /// Keeps the smaller index as the root.
    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        true
    }
}

fn cell_of(p: &Point, h: f64) -> (i64, i64, i64) {
    (
        (p.x / h).floor() as i64,
        (p.y / h).floor() as i64,
        (p.z / h).floor() as i64,
    )
}

/// Returns the welded vertex list and old->new index map, or `None` if no
/// pair is within `eps`.
fn weld_vertices(vertices: &[Point], eps: f64) -> Option<(Vec<Point>, Vec<u32>)> {
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    for (i, p) in vertices.iter().enumerate() {
        grid.entry(cell_of(p, eps)).or_default().push(i as u32);
    }
    let mut uf = UnionFind::new(vertices.len());
    let mut any = false;
    for (i, p) in vertices.iter().enumerate() {
        let (cx, cy, cz) = cell_of(p, eps);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in bucket {
                        if (j as usize) > i && (vertices[j as usize] - p).norm() <= eps {
                            any |= uf.union(i as u32, j);
                        }
                    }
                }
            }
        }
    }
    if !any {
        return None;
    }
    let mut new_index = vec![u32::MAX; vertices.len()];
    let mut sums: Vec<(nalgebra::Vector3<f64>, usize)> = Vec::new();
    let mut remap = vec![0u32; vertices.len()];
    for i in 0..vertices.len() {
        let root = uf.find(i as u32) as usize;
        if new_index[root] == u32::MAX {
            new_index[root] = sums.len() as u32;
            sums.push((nalgebra::Vector3::zeros(), 0));
        }
        let slot = new_index[root];
        remap[i] = slot;
        sums[slot as usize].0 += vertices[i].coords;
        sums[slot as usize].1 += 1;
    }
    let welded = sums
        .into_iter()
        .map(|(s, n)| Point::from(s / n as f64))
        .collect();
    Some((welded, remap))
}

/// Drops faces with a repeated index and all but the first copy of each
/// unordered vertex triple.
fn dedup_faces(faces: Vec<[u32; 3]>) -> Vec<[u32; 3]> {
    let mut seen = HashSet::with_capacity(faces.len());
    faces
        .into_iter()
        .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
        .filter(|f| {
            let mut key = *f;
            key.sort_unstable();
            seen.insert(key)
        })
        .collect()
}

/// Splits each edge at the interior vertex closest to its first endpoint.
/// Each face is split at most once per call. Returns whether anything changed.
fn split_t_junctions(vertices: &[Point], faces: &mut Vec<[u32; 3]>, tol: f64) -> bool {
    if faces.is_empty() {
        return false;
    }
    // Grid over vertices with roughly one vertex per cell.
    let bb = crate::geom::Aabb::from_points(vertices);
    let h = (bb.diagonal() / (vertices.len() as f64).cbrt().max(1.0)).max(tol * 4.0);
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    for (i, p) in vertices.iter().enumerate() {
        grid.entry(cell_of(p, h)).or_default().push(i as u32);
    }

    let mut edges: Vec<EdgeKey> = faces.iter().flat_map(face_edges).collect();
    edges.sort_unstable();
    edges.dedup();

    let mut splits: HashMap<EdgeKey, u32> = HashMap::new();
    for e in &edges {
        let a = vertices[e.lo() as usize];
        let b = vertices[e.hi() as usize];
        let len = (b - a).norm();
        if len <= 2.0 * tol {
            continue;
        }
        let mut best: Option<(f64, u32)> = None;
        let mut consider = |v: u32| {
            if e.contains(v) {
                return;
            }
            let p = vertices[v as usize];
            let (d, t) = point_segment_distance(&p, &a, &b);
            if d < tol && t * len > tol && (1.0 - t) * len > tol {
                let better = match best {
                    None => true,
                    Some((bt, bv)) => t < bt || (t == bt && v < bv),
                };
                if better {
                    best = Some((t, v));
                }
            }
        };
        let lo = cell_of(&a.inf(&b), h);
        let hi = cell_of(&a.sup(&b), h);
        let span = ((hi.0 - lo.0 + 3) * (hi.1 - lo.1 + 3) * (hi.2 - lo.2 + 3)) as usize;
        if span > vertices.len() {
            (0..vertices.len() as u32).for_each(&mut consider);
        } else {
            for x in lo.0 - 1..=hi.0 + 1 {
                for y in lo.1 - 1..=hi.1 + 1 {
                    for z in lo.2 - 1..=hi.2 + 1 {
                        if let Some(bucket) = grid.get(&(x, y, z)) {
                            bucket.iter().copied().for_each(&mut consider);
                        }
                    }
                }
            }
        }
        if let Some((_, v)) = best {
            splits.insert(*e, v);
        }
    }
    if splits.is_empty() {
        return false;
    }

    let mut out = Vec::with_capacity(faces.len() + splits.len() * 2);
    for f in faces.iter() {
        let hit = (0..3).find_map(|i| {
            let (a, b) = (f[i], f[(i + 1) % 3]);
            splits.get(&EdgeKey::new(a, b)).map(|&v| (i, v))
        });
        match hit {
            Some((i, v)) => {
                let mut f1 = *f;
                f1[(i + 1) % 3] = v;
                let mut f2 = *f;
                f2[i] = v;
                out.push(f1);
                out.push(f2);
            }
            None => out.push(*f),
        }
    }
    *faces = dedup_faces(out);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    #[test]
    fn welds_close_vertices() {
        let verts = vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(1.0005, 0., 0.), p(1., 1., 0.)];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [3, 4, 2]]).unwrap();
        let out = clean_mesh(&mesh, 0.001).unwrap();
        assert_eq!(out.vertex_count(), 4);
        assert!((out.vertices[1] - p(1.00025, 0., 0.)).norm() < 1e-12);
        assert_eq!(out.faces, vec![[0, 1, 2], [1, 3, 2]]);
    }

    #[test]
    fn clean_mesh_is_unchanged() {
        let verts = vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(1., 1., 0.)];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [1, 3, 2]]).unwrap();
        assert_eq!(clean_mesh(&mesh, 0.001).unwrap(), mesh);
    }

    #[test]
    fn removes_duplicate_faces() {
        let verts = vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [2, 1, 0], [1, 2, 0]]).unwrap();
        assert_eq!(clean_mesh(&mesh, 0.001).unwrap().faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn splits_t_junction() {
        // Vertex 4 lies on edge (0,1) of the upper face only.
        let verts = vec![p(0., 0., 0.), p(2., 0., 0.), p(1., 1., 0.), p(1., -1., 0.), p(1., 0., 0.)];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [0, 4, 3], [4, 1, 3]]).unwrap();
        let out = clean_mesh(&mesh, 0.001).unwrap();
        assert_eq!(out.face_count(), 4);
        assert!(out.faces.contains(&[0, 4, 2]));
        assert!(out.faces.contains(&[4, 1, 2]));
        let total: f64 = out.surface_area();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_indices() {
        let mesh = TriangleMesh::from_parts(vec![p(0., 0., 0.)], vec![[0, 1, 2]]);
        assert!(clean_mesh(&mesh, 0.001).is_err());
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(
            coords in proptest::collection::vec((0i32..6, 0i32..6, 0i32..3), 4..24),
            face_seed in proptest::collection::vec((0usize..64, 0usize..64, 0usize..64), 1..30),
        ) {
            // Coarse lattice coordinates plus sub-eps jitter produce welds,
            // duplicates and collinear configurations.
            let verts: Vec<Point> = coords
                .iter()
                .enumerate()
                .map(|(i, &(x, y, z))| p(x as f64 * 0.1 + (i % 3) as f64 * 2e-4, y as f64 * 0.1, z as f64 * 0.1))
                .collect();
            let n = verts.len();
            let faces: Vec<[u32; 3]> = face_seed.iter().map(|&(a, b, c)| [(a % n) as u32, (b % n) as u32, (c % n) as u32]).collect();
            let mesh = TriangleMesh::new(verts, faces).unwrap();
            let once = clean_mesh(&mesh, 0.001).unwrap();
            let twice = clean_mesh(&once, 0.001).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
