//! Triangle-triangle intersection that tolerates shared vertices and edges.
//!
//! Contact explained by shared simplices is allowed. Anything else, including
//! touching within `eps`, counts as intersecting.

use crate::geom::{Point, Vector};
use crate::{Error, Result};

/// A triangle with its vertex ids, used to detect shared simplices.
#[derive(Debug, Clone, Copy)]
pub struct Tri {
    pub ids: [u32; 3],
    pub p: [Point; 3],
}

impl Tri {
    pub fn new(ids: [u32; 3], p: [Point; 3]) -> Self {
        Tri { ids, p }
    }

    fn normal(&self) -> Vector {
        (self.p[1] - self.p[0]).cross(&(self.p[2] - self.p[0]))
    }
}

/// Whether `a` and `b` intersect anywhere other than at shared vertices or a
/// shared edge. `eps` is an absolute length tolerance.
pub fn triangles_intersect(a: &Tri, b: &Tri, eps: f64) -> Result<bool> {
    let na = a.normal();
    let nb = b.normal();
    if na.norm_squared() == 0.0 || nb.norm_squared() == 0.0 {
        return Err(Error::Degenerate("intersection test on a zero-area triangle".into()));
    }
    let shared: Vec<(usize, usize)> = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .filter(|&(i, j)| a.ids[i] == b.ids[j])
        .collect();
    Ok(match shared.len() {
        0 => disjoint_intersect(a, b, eps),
        1 => vertex_shared_intersect(a, b, shared[0], eps),
        2 => edge_shared_intersect(a, b, &shared, eps),
        _ => true,
    })
}

fn unit(v: Vector) -> Vector {
    v / v.norm()
}

/// Signed distances of the corners of `t` to the plane of `s`.
fn plane_distances(s: &Tri, t: &Tri) -> [f64; 3] {
    let n = unit(s.normal());
    t.p.map(|q| n.dot(&(q - s.p[0])))
}

fn edge_shared_intersect(a: &Tri, b: &Tri, shared: &[(usize, usize)], eps: f64) -> bool {
    let ia = 3 - shared[0].0 - shared[1].0;
    let ib = 3 - shared[0].1 - shared[1].1;
    let p = a.p[shared[0].0];
    let q = a.p[shared[1].0];
    let (oa, ob) = (a.p[ia], b.p[ib]);
    let off_plane = unit(a.normal()).dot(&(ob - p)).abs();
    let off_plane_b = unit(b.normal()).dot(&(oa - p)).abs();
    if off_plane > eps && off_plane_b > eps {
        return false;
    }
    // Coplanar: overlapping unless the free corners are on opposite sides.
    let e = q - p;
    let side = e.cross(&(oa - p)).dot(&e.cross(&(ob - p)));
    let scale = e.norm_squared() * (oa - p).norm() * (ob - p).norm();
    side > -1e-12 * scale
}

/// Whether `u` lies in the closed cone spanned by `e1`, `e2` (tolerant).
fn in_cone(u: &Vector, e1: &Vector, e2: &Vector, tol: f64) -> bool {
    let n = e1.cross(e2);
    let a = e1.cross(u).dot(&n);
    let b = u.cross(e2).dot(&n);
    let s = tol * n.norm() * u.norm() * e1.norm().max(e2.norm());
    a >= -s && b >= -s
}

fn vertex_shared_intersect(a: &Tri, b: &Tri, (i, j): (usize, usize), eps: f64) -> bool {
    let s = a.p[i];
    let ea = [a.p[(i + 1) % 3] - s, a.p[(i + 2) % 3] - s];
    let eb = [b.p[(j + 1) % 3] - s, b.p[(j + 2) % 3] - s];
    let da = plane_distances(a, b);
    let db = plane_distances(b, a);
    let coplanar = da.iter().all(|d| d.abs() <= eps) || db.iter().all(|d| d.abs() <= eps);
    const TOL: f64 = 1e-9;
    if coplanar {
        return eb.iter().any(|u| in_cone(u, &ea[0], &ea[1], TOL)) || ea.iter().any(|u| in_cone(u, &eb[0], &eb[1], TOL));
    }
    // If the free corners of one triangle lie strictly on one side of the
    // other's plane, only the apex can be shared.
    let strictly_one_side = |d: &[f64; 3], skip: usize| {
        let rest: Vec<f64> = (0..3).filter(|&k| k != skip).map(|k| d[k]).collect();
        (rest[0] > eps && rest[1] > eps) || (rest[0] < -eps && rest[1] < -eps)
    };
    if strictly_one_side(&da, j) || strictly_one_side(&db, i) {
        return false;
    }
    let d = a.normal().cross(&b.normal());
    if d.norm_squared() == 0.0 {
        return eb.iter().any(|u| in_cone(u, &ea[0], &ea[1], TOL)) || ea.iter().any(|u| in_cone(u, &eb[0], &eb[1], TOL));
    }
    [d, -d]
        .iter()
        .any(|u| in_cone(u, &ea[0], &ea[1], TOL) && in_cone(u, &eb[0], &eb[1], TOL))
}

/// Interval of `t` along direction `dir` where it crosses the plane with
/// signed corner distances `d` (already snapped to zero within tolerance).
fn plane_interval(t: &Tri, d: &[f64; 3], dir: &Vector) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut push = |p: Point| {
        let x = dir.dot(&p.coords);
        lo = lo.min(x);
        hi = hi.max(x);
    };
    for k in 0..3 {
        if d[k] == 0.0 {
            push(t.p[k]);
        }
        let m = (k + 1) % 3;
        if (d[k] > 0.0 && d[m] < 0.0) || (d[k] < 0.0 && d[m] > 0.0) {
            let s = d[k] / (d[k] - d[m]);
            push(t.p[k] + (t.p[m] - t.p[k]) * s);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn snap(d: [f64; 3], eps: f64) -> [f64; 3] {
    d.map(|x| if x.abs() <= eps { 0.0 } else { x })
}

fn disjoint_intersect(a: &Tri, b: &Tri, eps: f64) -> bool {
    let da = snap(plane_distances(b, a), eps);
    let db = snap(plane_distances(a, b), eps);
    let separated = |d: &[f64; 3]| d.iter().all(|&x| x > 0.0) || d.iter().all(|&x| x < 0.0);
    if separated(&da) || separated(&db) {
        return false;
    }
    if da.iter().all(|&x| x == 0.0) || db.iter().all(|&x| x == 0.0) {
        let n = if a.normal().norm() >= b.normal().norm() { a.normal() } else { b.normal() };
        return coplanar_intersect(a, b, &n, eps);
    }
    let dir = a.normal().cross(&b.normal());
    if dir.norm_squared() == 0.0 {
        return coplanar_intersect(a, b, &a.normal(), eps);
    }
    let dir = unit(dir);
    match (plane_interval(a, &da, &dir), plane_interval(b, &db, &dir)) {
        (Some((a0, a1)), Some((b0, b1))) => a0 <= b1 + eps && b0 <= a1 + eps,
        _ => false,
    }
}

type P2 = [f64; 2];

fn orient(a: P2, b: P2, c: P2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn len2(a: P2, b: P2) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

/// Closed segment intersection with distance tolerance `eps`.
fn segments_touch(p: P2, q: P2, r: P2, s: P2, eps: f64) -> bool {
    let o1 = orient(p, q, r);
    let o2 = orient(p, q, s);
    let o3 = orient(r, s, p);
    let o4 = orient(r, s, q);
    let t1 = eps * len2(p, q);
    let t2 = eps * len2(r, s);
    let proper = ((o1 > t1 && o2 < -t1) || (o1 < -t1 && o2 > t1)) && ((o3 > t2 && o4 < -t2) || (o3 < -t2 && o4 > t2));
    if proper {
        return true;
    }
    point_near_segment(r, p, q, eps) || point_near_segment(s, p, q, eps) || point_near_segment(p, r, s, eps) || point_near_segment(q, r, s, eps)
}

fn point_near_segment(x: P2, a: P2, b: P2, eps: f64) -> bool {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ax = [x[0] - a[0], x[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if l2 > 0.0 { ((ax[0] * ab[0] + ax[1] * ab[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let d = [ax[0] - t * ab[0], ax[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt() <= eps
}

fn point_in_triangle(x: P2, t: &[P2; 3], eps: f64) -> bool {
    let area = orient(t[0], t[1], t[2]);
    let sign = area.signum();
    (0..3).all(|k| {
        let (u, v) = (t[k], t[(k + 1) % 3]);
        sign * orient(u, v, x) >= -eps * len2(u, v)
    })
}

fn coplanar_intersect(a: &Tri, b: &Tri, n: &Vector, eps: f64) -> bool {
    let axis = n.iamax();
    let (i, j) = ((axis + 1) % 3, (axis + 2) % 3);
    let pa = a.p.map(|p| [p[i], p[j]]);
    let pb = b.p.map(|p| [p[i], p[j]]);
    for k in 0..3 {
        for m in 0..3 {
            if segments_touch(pa[k], pa[(k + 1) % 3], pb[m], pb[(m + 1) % 3], eps) {
                return true;
            }
        }
    }
    point_in_triangle(pa[0], &pb, eps) || point_in_triangle(pb[0], &pa, eps)
}

/// Whether `a` and `b`, sharing one vertex or one edge, fold onto each other:
/// their planes are within `max_angle` radians (as unoriented lines) and,
/// projected onto the plane of `a`, their corners at a shared vertex overlap
/// in more than a boundary ray. Faces sharing nothing never fold.
pub fn triangles_fold(a: &Tri, b: &Tri, max_angle: f64) -> bool {
    let (na, nb) = (unit(a.normal()), unit(b.normal()));
    if na.dot(&nb).abs() < max_angle.cos() {
        return false;
    }
    let flat = |v: Vector| v - na * na.dot(&v);
    // Strict containment; rays along a shared edge are not overlap.
    const TOL: f64 = -1e-6;
    for i in 0..3 {
        let Some(j) = (0..3).find(|&j| b.ids[j] == a.ids[i]) else { continue };
        let s = a.p[i];
        let ea = [a.p[(i + 1) % 3] - s, a.p[(i + 2) % 3] - s];
        let eb = [flat(b.p[(j + 1) % 3] - s), flat(b.p[(j + 2) % 3] - s)];
        let inside_a = eb
            .iter()
            .zip([(j + 1) % 3, (j + 2) % 3])
            .any(|(u, k)| !a.ids.contains(&b.ids[k]) && in_cone(u, &ea[0], &ea[1], TOL));
        let inside_b = ea
            .iter()
            .zip([(i + 1) % 3, (i + 2) % 3])
            .any(|(u, k)| !b.ids.contains(&a.ids[k]) && in_cone(&flat(*u), &eb[0], &eb[1], TOL));
        if inside_a || inside_b {
            return true;
        }
        // Identical cones leave no corner strictly inside the other.
        let bis_a = unit(ea[0]) + unit(ea[1]);
        if in_cone(&bis_a, &eb[0], &eb[1], TOL) && in_cone(&flat(unit(eb[0]) + unit(eb[1])), &ea[0], &ea[1], TOL) {
            return true;
        }
    }
    false
}
