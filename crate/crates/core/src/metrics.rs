//! Surface comparison metrics over dense samples: F-score, Chamfer distance
//! and normal consistency. Nearest-neighbor queries are exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{Point, Vector};
use crate::mesh::TriangleMesh;
use crate::rng::stage_seed;
use crate::sampling::area_uniform_sample;
use crate::spatial::KdTree;
use crate::{Error, Result};

/// For every point of `from`, its nearest point in `to` as `(index, squared
/// distance)`; ties go to the lower index.
pub fn nearest_map(from: &[Point], to: &[Point]) -> Vec<(u32, f64)> {
    let tree = KdTree::new(to);
    from.par_iter().map(|p| tree.nearest(p).expect("non-empty target set")).collect()
}

fn non_empty(a: &[Point], b: &[Point]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("metric needs two non-empty point sets"));
    }
    Ok(())
}

fn fraction_within(map: &[(u32, f64)], mu: f64) -> f64 {
    let t = mu * mu;
    map.iter().filter(|&&(_, d2)| d2 <= t).count() as f64 / map.len() as f64
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Precision and recall at `mu`: the fraction of `recon` points within `mu`
/// of `gt`, and of `gt` points within `mu` of `recon`.
pub fn precision_recall(recon: &[Point], gt: &[Point], mu: f64) -> Result<(f64, f64)> {
    non_empty(recon, gt)?;
    if !(mu > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {mu}")));
    }
    Ok((
        fraction_within(&nearest_map(recon, gt), mu),
        fraction_within(&nearest_map(gt, recon), mu),
    ))
}

/// Harmonic mean of precision and recall at `mu`.
pub fn fscore(recon: &[Point], gt: &[Point], mu: f64) -> Result<f64> {
    let (p, r) = precision_recall(recon, gt, mu)?;
    Ok(harmonic(p, r))
}

fn directed_mean(map: &[(u32, f64)]) -> f64 {
    map.iter().map(|&(_, d2)| d2.sqrt()).sum::<f64>() / map.len() as f64
}

/// Mean of the two directed mean nearest-neighbor distances, times 100.
pub fn chamfer(recon: &[Point], gt: &[Point]) -> Result<f64> {
    non_empty(recon, gt)?;
    let a = directed_mean(&nearest_map(recon, gt));
    let b = directed_mean(&nearest_map(gt, recon));
    Ok(50.0 * (a + b))
}

fn directed_normals(map: &[(u32, f64)], from: &[Vector], to: &[Vector]) -> f64 {
    map.iter()
        .zip(from)
        .map(|(&(j, _), n)| n.dot(&to[j as usize]).abs())
        .sum::<f64>()
        / map.len() as f64
}

/// Mean absolute dot product between each normal and the normal of its
/// nearest point on the other side, averaged over both directions.
pub fn normal_consistency(recon: &[Point], recon_normals: &[Vector], gt: &[Point], gt_normals: &[Vector]) -> Result<f64> {
    non_empty(recon, gt)?;
    if recon_normals.len() != recon.len() || gt_normals.len() != gt.len() {
        return Err(Error::invalid("normal consistency needs one normal per point on both sides"));
    }
    let a = directed_normals(&nearest_map(recon, gt), recon_normals, gt_normals);
    let b = directed_normals(&nearest_map(gt, recon), gt_normals, recon_normals);
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fscore_mu: f64,
    pub fscore_2mu: f64,
    pub chamfer_x100: f64,
    pub normal_consistency: f64,
    pub precision_mu: f64,
    pub recall_mu: f64,
    pub mu: f64,
    pub n_samples: usize,
}

impl EvalReport {
    /// One `key=value` line per field.
    pub fn to_key_value(&self) -> String {
        format!(
            "fscore_mu={}\nfscore_2mu={}\nchamfer_x100={}\nnormal_consistency={}\nprecision_mu={}\nrecall_mu={}\nmu={}\nn_samples={}\n",
            self.fscore_mu,
            self.fscore_2mu,
            self.chamfer_x100,
            self.normal_consistency,
            self.precision_mu,
            self.recall_mu,
            self.mu,
            self.n_samples
        )
    }
}

/// Compares `recon` against `gt` using `n_samples` area-uniform samples on
/// the faces of each. The threshold is `mu = sqrt(area(gt) / n_samples)`.
/// Both meshes draw from the same random stream, so identical meshes get
/// identical samples.
pub fn evaluate(recon: &TriangleMesh, gt: &TriangleMesh, n_samples: usize, seed: u64) -> Result<EvalReport> {
    let area = gt.surface_area();
    if !(area > 0.0) {
        return Err(Error::Degenerate("ground-truth mesh has zero area".into()));
    }
    if !(recon.surface_area() > 0.0) {
        return Err(Error::Degenerate("reconstructed mesh has zero area".into()));
    }
    let stream = stage_seed(seed, "evaluate");
    let rs = area_uniform_sample(recon, n_samples, stream)?;
    let gs = area_uniform_sample(gt, n_samples, stream)?;
    let (rp, rn): (Vec<Point>, Vec<Vector>) = rs.iter().map(|s| (s.position, s.normal)).unzip();
    let (gp, gn): (Vec<Point>, Vec<Vector>) = gs.iter().map(|s| (s.position, s.normal)).unzip();
    let r2g = nearest_map(&rp, &gp);
    let g2r = nearest_map(&gp, &rp);
    let mu = (area / n_samples as f64).sqrt();
    let (p1, r1) = (fraction_within(&r2g, mu), fraction_within(&g2r, mu));
    let (p2, r2) = (fraction_within(&r2g, 2.0 * mu), fraction_within(&g2r, 2.0 * mu));
    Ok(EvalReport {
        fscore_mu: harmonic(p1, r1),
        fscore_2mu: harmonic(p2, r2),
        chamfer_x100: 50.0 * (directed_mean(&r2g) + directed_mean(&g2r)),
        normal_consistency: 0.5 * (directed_normals(&r2g, &rn, &gn) + directed_normals(&g2r, &gn, &rn)),
        precision_mu: p1,
        recall_mu: r1,
        mu,
        n_samples,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::shapes;
    use crate::spatial::dist2;

    fn brute_nearest(from: &[Point], to: &[Point]) -> Vec<(u32, f64)> {
        from.iter()
            .map(|p| {
                let mut best = (0u32, f64::INFINITY);
                for (j, q) in to.iter().enumerate() {
                    let d = dist2(p, q);
                    if d < best.1 {
                        best = (j as u32, d);
                    }
                }
                best
            })
            .collect()
    }

    fn brute_metrics(a: &[Point], an: &[Vector], b: &[Point], bn: &[Vector], mu: f64) -> (f64, f64, f64) {
        let ab = brute_nearest(a, b);
        let ba = brute_nearest(b, a);
        let within = |m: &[(u32, f64)]| m.iter().filter(|x| x.1 <= mu * mu).count() as f64 / m.len() as f64;
        let (p, r) = (within(&ab), within(&ba));
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let mean = |m: &[(u32, f64)]| {
            let mut s = 0.0;
            for x in m {
                s += x.1.sqrt();
            }
            s / m.len() as f64
        };
        let cd = 50.0 * (mean(&ab) + mean(&ba));
        let nc = |m: &[(u32, f64)], from: &[Vector], to: &[Vector]| {
            let mut s = 0.0;
            for (i, x) in m.iter().enumerate() {
                s += from[i].dot(&to[x.0 as usize]).abs();
            }
            s / m.len() as f64
        };
        (f, cd, 0.5 * (nc(&ab, an, bn) + nc(&ba, bn, an)))
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Point>, Vec<Vector>) {
        (0..n)
            .map(|_| {
                let p = Point::new(rng.random(), rng.random(), (rng.random::<f64>() * 4.0).round() / 4.0);
                let n = Vector::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0).normalize();
                (p, n)
            })
            .unzip()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn indexed_metrics_equal_brute_force(seed in 0u64..100_000, n in 1usize..400, m in 1usize..400) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, an) = random_set(&mut rng, n);
            let (b, bn) = random_set(&mut rng, m);
            let mu = rng.random_range(0.01..0.2);
            let (f, cd, nc) = brute_metrics(&a, &an, &b, &bn, mu);
            prop_assert_eq!(fscore(&a, &b, mu).unwrap(), f);
            prop_assert_eq!(chamfer(&a, &b).unwrap(), cd);
            prop_assert_eq!(normal_consistency(&a, &an, &b, &bn).unwrap(), nc);
            prop_assert_eq!(fscore(&b, &a, mu).unwrap(), f);
            prop_assert!(fscore(&a, &b, 2.0 * mu).unwrap() >= f);
        }
    }

    #[test]
    fn fscore_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, _) = random_set(&mut rng, 500);
        assert_eq!(fscore(&a, &a, 0.01).unwrap(), 1.0);
        let shifted: Vec<Point> = a.iter().map(|p| p + Vector::new(0.0, 0.0, 10.0)).collect();
        assert_eq!(fscore(&shifted, &a, 0.05).unwrap(), 0.0);
        // Recon covers only the half with x < 0.5.
        let half: Vec<Point> = a.iter().copied().filter(|p| p.x < 0.5).collect();
        let far: Vec<Point> = a.iter().copied().filter(|p| p.x >= 0.5).collect();
        let gt: Vec<Point> = half.iter().chain(&far).copied().collect();
        let mu = 1e-9;
        let (p, r) = precision_recall(&half, &gt, mu).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(r, half.len() as f64 / gt.len() as f64);
        assert!(fscore(&[], &a, 0.1).is_err());
        assert!(fscore(&a, &a, 0.0).is_err());
    }

    #[test]
    fn chamfer_and_normal_examples() {
        let a = [Point::origin()];
        let b = [Point::new(0.01, 0.0, 0.0)];
        assert!((chamfer(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        let z = [Vector::z()];
        assert_eq!(normal_consistency(&a, &z, &b, &[-Vector::z()]).unwrap(), 1.0);
        assert_eq!(normal_consistency(&a, &z, &b, &[Vector::x()]).unwrap(), 0.0);
        assert!(normal_consistency(&a, &[], &b, &z).is_err());
    }

    #[test]
    fn self_evaluation() {
        let s = shapes::icosphere(0.5, 3);
        let r = evaluate(&s, &s, 20_000, 1).unwrap();
        assert!((r.mu - (s.surface_area() / 20_000.0).sqrt()).abs() < 1e-15);
        assert!(r.fscore_mu >= 0.99, "{r:?}");
        assert!(r.fscore_2mu >= r.fscore_mu);
        assert!(r.normal_consistency >= 0.99);
        assert!(r.chamfer_x100 <= 0.2 * r.mu * 100.0);
        let text = r.to_key_value();
        for key in ["fscore_mu=", "fscore_2mu=", "chamfer_x100=", "normal_consistency=", "mu="] {
            assert!(text.contains(key));
        }
    }

    #[test]
    fn far_apart_spheres_score_zero() {
        let a = shapes::icosphere(0.5, 2);
        let b = a.transformed(1.0, Vector::new(10.0, 0.0, 0.0));
        let r = evaluate(&a, &b, 5000, 2).unwrap();
        assert_eq!(r.fscore_mu, 0.0);
        assert!(evaluate(&TriangleMesh::new(a.vertices.clone(), vec![]).unwrap(), &a, 10, 0).is_err());
    }

    #[test]
    fn unit_sphere_threshold() {
        let mu = (std::f64::consts::PI / 1e6).sqrt();
        assert!((mu - 0.00177).abs() < 5e-6);
    }
}
