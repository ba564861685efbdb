//! Surface sampling: area-uniform, Poisson-disk, replication and noise.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::{unit_normal, Point, Vector};
use crate::mesh::{PointCloud, TriangleMesh};
use crate::rng::{stage_rng, StageRng};
use crate::spatial::{dist2, KdTree};
use crate::{Error, Result};

/// A point on a mesh face with that face's unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledPoint {
    pub position: Point,
    pub normal: Vector,
    pub face_id: u32,
}

/// Collects samples into a point cloud carrying normals and face provenance.
pub fn to_point_cloud(samples: &[SampledPoint]) -> PointCloud {
    PointCloud {
        points: samples.iter().map(|s| s.position).collect(),
        normals: Some(samples.iter().map(|s| s.normal).collect()),
        face_ids: Some(samples.iter().map(|s| s.face_id).collect()),
    }
}

/// Area-weighted face picker.
struct FaceSampler<'a> {
    mesh: &'a TriangleMesh,
    cdf: Vec<f64>,
    normals: Vec<Vector>,
    total: f64,
}

impl<'a> FaceSampler<'a> {
    fn new(mesh: &'a TriangleMesh) -> Result<Self> {
        mesh.validate()?;
        let mut cdf = Vec::with_capacity(mesh.face_count());
        let mut normals = Vec::with_capacity(mesh.face_count());
        let mut total = 0.0;
        for f in 0..mesh.face_count() {
            let [a, b, c] = mesh.corners(f);
            total += mesh.face_area(f);
            cdf.push(total);
            normals.push(unit_normal(&a, &b, &c).unwrap_or_else(Vector::z));
        }
        if !(total > 0.0) {
            return Err(Error::Degenerate("mesh has zero surface area".into()));
        }
        Ok(FaceSampler {
            mesh,
            cdf,
            normals,
            total,
        })
    }

    fn sample(&self, rng: &mut StageRng) -> SampledPoint {
        let r = rng.random::<f64>() * self.total;
        let face = self.cdf.partition_point(|&c| c <= r).min(self.cdf.len() - 1);
        // Skip zero-area faces that a boundary hit could select.
        let face = if self.mesh.face_area(face) == 0.0 {
            (face..self.cdf.len())
                .find(|&f| self.mesh.face_area(f) > 0.0)
                .unwrap_or_else(|| (0..face).rev().find(|&f| self.mesh.face_area(f) > 0.0).unwrap())
        } else {
            face
        };
        let [a, b, c] = self.mesh.corners(face);
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let (u, v, w) = (1.0 - s, s * (1.0 - r2), s * r2);
        SampledPoint {
            position: Point::from(a.coords * u + b.coords * v + c.coords * w),
            normal: self.normals[face],
            face_id: face as u32,
        }
    }
}

/// `n` points with faces chosen in proportion to area and uniform
/// barycentric placement.
pub fn area_uniform_sample(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<SampledPoint>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let sampler = FaceSampler::new(mesh)?;
    let mut rng = stage_rng(seed, "area-uniform");
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}

/// Hexagonal-packing spacing estimate for `n` points on area `area`.
pub fn hex_spacing(area: f64, n: usize) -> f64 {
    (area / (2.0 * 3f64.sqrt() * n as f64)).sqrt()
}

/// Blue-noise sampling targeting `n_target` points.
///
/// Dart throwing with a hard rejection radius of half the hex-packing spacing
/// builds an oversized pool, then weighted sample elimination removes the most
/// crowded points until `n_target` remain.
pub fn poisson_disk_sample(mesh: &TriangleMesh, n_target: usize, seed: u64) -> Result<Vec<SampledPoint>> {
    if n_target == 0 {
        return Err(Error::invalid("target count must be at least 1"));
    }
    let sampler = FaceSampler::new(mesh)?;
    let mut rng = stage_rng(seed, "poisson-disk");
    let r_est = hex_spacing(sampler.total, n_target);
    let r_min = 0.5 * r_est;

    // Dart throwing on a hash grid with cell size r_min.
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    let cell = |p: &Point| {
        (
            (p.x / r_min).floor() as i64,
            (p.y / r_min).floor() as i64,
            (p.z / r_min).floor() as i64,
        )
    };
    let pool_goal = 3 * n_target;
    let max_attempts = 30 * n_target + 100;
    let r_min2 = r_min * r_min;
    let mut pool: Vec<SampledPoint> = Vec::with_capacity(pool_goal);
    let mut failures_in_a_row = 0usize;
    for _ in 0..max_attempts {
        if pool.len() >= pool_goal || failures_in_a_row > 20 * n_target.max(50) {
            break;
        }
        let s = sampler.sample(&mut rng);
        let (cx, cy, cz) = cell(&s.position);
        let mut ok = true;
        'scan: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        if bucket.iter().any(|&j| dist2(&pool[j as usize].position, &s.position) < r_min2) {
                            ok = false;
                            break 'scan;
                        }
                    }
                }
            }
        }
        if ok {
            grid.entry((cx, cy, cz)).or_default().push(pool.len() as u32);
            pool.push(s);
            failures_in_a_row = 0;
        } else {
            failures_in_a_row += 1;
        }
    }
    if pool.len() <= n_target {
        return Ok(pool);
    }
    Ok(eliminate(pool, n_target, sampler.total))
}

/// Weighted sample elimination (Yuksel 2015) down to `n_target` points.
fn eliminate(pool: Vec<SampledPoint>, n_target: usize, area: f64) -> Vec<SampledPoint> {
    let positions: Vec<Point> = pool.iter().map(|s| s.position).collect();
    let r_max = 2.0 * hex_spacing(area, n_target);
    let tree = KdTree::new(&positions);
    let neighbors: Vec<Vec<(u32, f64)>> = positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            tree.within_radius(p, r_max)
                .into_iter()
                .filter(|&j| j as usize != i)
                .map(|j| {
                    let d = dist2(p, &positions[j as usize]).sqrt();
                    (j, (1.0 - d / r_max).powi(8))
                })
                .collect()
        })
        .collect();
    let mut weight: Vec<f64> = neighbors.iter().map(|ns| ns.iter().map(|n| n.1).sum()).collect();
    let mut alive = vec![true; pool.len()];

    // Lazy max-heap keyed by (weight, index); stale entries are skipped.
    #[derive(PartialEq)]
    struct Key(f64, u32);
    impl Eq for Key {}
    impl Ord for Key {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&o.0).then(o.1.cmp(&self.1))
        }
    }
    impl PartialOrd for Key {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    let mut heap: std::collections::BinaryHeap<Key> =
        weight.iter().enumerate().map(|(i, &w)| Key(w, i as u32)).collect();
    let mut remaining = pool.len();
    while remaining > n_target {
        let Some(Key(w, i)) = heap.pop() else { break };
        if !alive[i as usize] || w != weight[i as usize] {
            continue;
        }
        alive[i as usize] = false;
        remaining -= 1;
        for &(j, wij) in &neighbors[i as usize] {
            if alive[j as usize] {
                weight[j as usize] -= wij;
                heap.push(Key(weight[j as usize], j));
            }
        }
    }
    pool.into_iter()
        .zip(alive)
        .filter_map(|(s, a)| a.then_some(s))
        .collect()
}

/// Pads `pc` to exactly `n` points by appending uniform random copies of
/// existing points. The original points keep their positions and order.
pub fn replicate_to_size(pc: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if pc.is_empty() {
        return Err(Error::invalid("cannot replicate an empty point cloud"));
    }
    if n < pc.len() {
        return Err(Error::invalid(format!(
            "target size {n} is smaller than the cloud ({} points)",
            pc.len()
        )));
    }
    let mut rng = stage_rng(seed, "replicate");
    let m = pc.len();
    let picks: Vec<usize> = (m..n).map(|_| rng.random_range(0..m)).collect();
    Ok(PointCloud {
        points: extend(&pc.points, &picks),
        normals: pc.normals.as_ref().map(|ns| extend(ns, &picks)),
        face_ids: pc.face_ids.as_ref().map(|fs| extend(fs, &picks)),
    })
}

fn extend<T: Copy>(v: &[T], picks: &[usize]) -> Vec<T> {
    v.iter().copied().chain(picks.iter().map(|&i| v[i])).collect()
}

/// Adds independent Gaussian noise with standard deviation `0.001 * t` to
/// every coordinate. `t = 0` returns the cloud unchanged. Normals and face
/// provenance are carried over as-is.
pub fn add_noise(pc: &PointCloud, t: f64, seed: u64) -> Result<PointCloud> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("noise level must be a finite value >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(pc.clone());
    }
    let sigma = 0.001 * t;
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let mut rng = stage_rng(seed, "noise");
    let mut out = pc.clone();
    for p in &mut out.points {
        for c in 0..3 {
            p[c] += normal.sample(&mut rng);
        }
    }
    Ok(out)
}
