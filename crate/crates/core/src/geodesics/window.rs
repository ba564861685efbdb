use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use nalgebra::Vector2;

use super::{GeodesicMesh, GeodesicResult};
use crate::mesh::EdgeKey;
use crate::{Error, Result};

type V2 = Vector2<f64>;

/// Relative tolerance for window trimming and endpoint tests.
const REL_EPS: f64 = 1e-10;

/// An interval `[b0, b1]` on the edge `v0 -> v1` of `face`, lit by straight
/// unfolded paths from `src` (which already carries distance `sigma`).
///
/// Coordinates are in the edge frame: `v0` at the origin, `v1` at `(len, 0)`,
/// and `face` (where the light comes from) on the negative-y side.
#[derive(Debug, Clone, Copy)]
struct Window {
    face: u32,
    v0: u32,
    v1: u32,
    len: f64,
    b0: f64,
    b1: f64,
    src: V2,
    sigma: f64,
    src_vertex: u32,
}

impl Window {
    fn lower_bound(&self) -> f64 {
        let dx = if self.src.x < self.b0 {
            self.b0 - self.src.x
        } else if self.src.x > self.b1 {
            self.src.x - self.b1
        } else {
            0.0
        };
        self.sigma + (dx * dx + self.src.y * self.src.y).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Window(u32),
    Vertex(u32),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    key: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Event {}
impl Ord for Event {
    // Reversed: BinaryHeap pops the smallest key first, FIFO among equal keys.
    fn cmp(&self, o: &Self) -> Ordering {
        o.key.total_cmp(&self.key).then(o.seq.cmp(&self.seq))
    }
}
impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn cross(a: V2, b: V2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Point where the ray from `src` through `(x, 0)` meets segment `p -> q`,
/// clamped to the segment.
fn ray_hit(src: V2, x: f64, p: V2, q: V2) -> V2 {
    let d = V2::new(x, 0.0) - src;
    let e = q - p;
    let denom = cross(e, d);
    if denom == 0.0 {
        return if (p - src).norm() <= (q - src).norm() { p } else { q };
    }
    let lambda = (cross(src - p, d) / denom).clamp(0.0, 1.0);
    p + e * lambda
}

/// Shrinks `[b0, b1]` to the hull of the points where the window path
/// `sigma + |src - P|` beats the vertex path `dv + |v - P|` by more than `-tol`.
/// Returns `None` if the vertex path wins everywhere.
fn trim(b0: f64, b1: f64, src: V2, sigma: f64, v: V2, dv: f64, tol: f64) -> Option<(f64, f64)> {
    if !dv.is_finite() {
        return Some((b0, b1));
    }
    // Keep where g(x) = |v - P| - |src - P| - c > 0.
    let c = sigma - dv - tol;
    let sv = (src - v).norm();
    if c < -sv {
        return Some((b0, b1));
    }
    if c >= sv {
        return None;
    }
    let g = |x: f64| {
        let p = V2::new(x, 0.0);
        (v - p).norm() - (src - p).norm() - c
    };
    // Squaring |v-P| = c + |src-P| leaves a quadratic in x: the |P|^2 terms cancel.
    let alpha = 2.0 * (src.x - v.x);
    let beta = v.norm_squared() - src.norm_squared() - c * c;
    let mut cuts = [b0, b1, b1, b1];
    let mut n = 1;
    let mut push = |r: f64| {
        if r.is_finite() && r > b0 && r < b1 {
            cuts[n] = r;
            n += 1;
        }
    };
    let qa = alpha * alpha - 4.0 * c * c;
    let qb = 2.0 * alpha * beta + 8.0 * c * c * src.x;
    let qc = beta * beta - 4.0 * c * c * src.norm_squared();
    let scale = qa.abs().max(qb.abs()).max(qc.abs());
    if qa.abs() <= 1e-14 * scale {
        if qb != 0.0 {
            push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // Numerically stable pair of roots.
            let t = -0.5 * (qb + qb.signum() * sq);
            if t != 0.0 {
                push(t / qa);
                push(qc / t);
            } else {
                push(0.0);
            }
        }
    }
    cuts[n] = b1;
    let cuts = &mut cuts[..=n];
    cuts.sort_by(f64::total_cmp);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for pair in cuts.windows(2) {
        let (l, r) = (pair[0], pair[1]);
        if r <= l {
            continue;
        }
        if g(0.5 * (l + r)) > 0.0 {
            lo = lo.min(l);
            hi = hi.max(r);
        }
    }
    (hi > lo).then_some((lo, hi))
}

/// Reusable single-source propagation state. One solver per thread.
pub struct GeodesicSolver<'m> {
    mesh: &'m GeodesicMesh,
    dist: Vec<f64>,
    emitted: Vec<bool>,
    touched: Vec<u32>,
    windows: Vec<Window>,
    heap: BinaryHeap<Event>,
    seq: u64,
    cutoff: f64,
    /// Windows processed by the last solve, for diagnostics.
    pub processed: usize,
}

impl<'m> GeodesicSolver<'m> {
    pub fn new(mesh: &'m GeodesicMesh) -> Self {
        let n = mesh.vertex_count();
        GeodesicSolver {
            mesh,
            dist: vec![f64::INFINITY; n],
            emitted: vec![false; n],
            touched: Vec::new(),
            windows: Vec::new(),
            heap: BinaryHeap::new(),
            seq: 0,
            cutoff: f64::INFINITY,
            processed: 0,
        }
    }

    fn reset(&mut self) {
        for &v in &self.touched {
            self.dist[v as usize] = f64::INFINITY;
            self.emitted[v as usize] = false;
        }
        self.touched.clear();
        self.windows.clear();
        self.heap.clear();
        self.seq = 0;
        self.processed = 0;
    }

    fn push(&mut self, key: f64, kind: Kind) {
        self.seq += 1;
        self.heap.push(Event {
            key,
            seq: self.seq,
            kind,
        });
    }

    fn relax(&mut self, v: u32, d: f64) {
        let cur = self.dist[v as usize];
        if d < cur {
            if cur == f64::INFINITY {
                self.touched.push(v);
            }
            self.dist[v as usize] = d;
            if self.mesh.pseudo_source[v as usize] && !self.emitted[v as usize] && d <= self.cutoff {
                self.push(d, Kind::Vertex(v));
            }
        }
    }

    /// Exact distances from `source` to `targets`, pruned at `cutoff`.
    pub fn solve(&mut self, source: u32, targets: &[u32], cutoff: f64) -> Result<GeodesicResult> {
        let n = self.mesh.vertex_count() as u32;
        if source >= n {
            return Err(Error::invalid(format!("source vertex {source} out of range ({n} vertices)")));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= n) {
            return Err(Error::invalid(format!("target vertex {t} out of range ({n} vertices)")));
        }
        if !(cutoff > 0.0) {
            return Err(Error::invalid(format!("cutoff must be positive, got {cutoff}")));
        }
        self.reset();
        self.cutoff = cutoff;

        let live: Vec<u32> = targets
            .iter()
            .copied()
            .filter(|&t| t != source && self.mesh.same_component(source, t))
            .collect();
        self.relax(source, 0.0);
        if !live.is_empty() {
            self.emit(source);
        }

        let mut since_check = 0usize;
        while let Some(ev) = self.heap.pop() {
            if ev.key > cutoff {
                break;
            }
            since_check += 1;
            if since_check >= 32 {
                since_check = 0;
                // Any later update is at least `ev.key`; settled targets cannot improve.
                if live.iter().all(|&t| self.dist[t as usize] <= ev.key) {
                    break;
                }
            }
            match ev.kind {
                Kind::Vertex(v) => {
                    if !self.emitted[v as usize] && self.dist[v as usize] <= ev.key {
                        self.emit(v);
                    }
                }
                Kind::Window(i) => {
                    self.processed += 1;
                    let w = self.windows[i as usize];
                    self.propagate(&w);
                }
            }
        }

        let distances: BTreeMap<u32, f64> = targets
            .iter()
            .map(|&t| {
                let d = self.dist[t as usize];
                let reachable = self.mesh.same_component(source, t) && d <= cutoff;
                (t, if reachable { d } else { f64::INFINITY })
            })
            .collect();
        Ok(GeodesicResult { source, distances })
    }

    /// Emits full-edge windows on every edge opposite `v`.
    fn emit(&mut self, v: u32) {
        self.emitted[v as usize] = true;
        let d = self.dist[v as usize];
        let mesh = self.mesh;
        let pv = mesh.positions[v as usize];
        for &f in &mesh.vertex_faces[v as usize] {
            let face = mesh.faces[f as usize];
            let k = face.iter().position(|&x| x == v).unwrap();
            let (a, b) = (face[(k + 1) % 3], face[(k + 2) % 3]);
            let pa = mesh.positions[a as usize];
            let pb = mesh.positions[b as usize];
            let len = (pb - pa).norm();
            let la = (pv - pa).norm();
            let lb = (pv - pb).norm();
            self.relax(a, d + la);
            self.relax(b, d + lb);
            let x = (la * la - lb * lb + len * len) / (2.0 * len);
            let y = -(la * la - x * x).max(0.0).sqrt();
            if y >= 0.0 {
                continue;
            }
            let w = Window {
                face: f,
                v0: a,
                v1: b,
                len,
                b0: 0.0,
                b1: len,
                src: V2::new(x, y),
                sigma: d,
                src_vertex: v,
            };
            self.enqueue(w);
        }
    }

    fn enqueue(&mut self, w: Window) {
        let key = w.lower_bound();
        if key > self.cutoff {
            return;
        }
        let id = self.windows.len() as u32;
        self.windows.push(w);
        self.push(key, Kind::Window(id));
    }

    fn trim_against(&self, b: (f64, f64), w: &Window, v: u32, pos: V2, tol: f64) -> Option<(f64, f64)> {
        if v == w.src_vertex {
            return Some(b);
        }
        trim(b.0, b.1, w.src, w.sigma, pos, self.dist[v as usize], tol)
    }

    fn propagate(&mut self, w: &Window) {
        let mesh = self.mesh;
        let len = w.len;
        let eps = REL_EPS * len;
        if w.b0 <= eps {
            self.relax(w.v0, w.sigma + w.src.norm());
        }
        if w.b1 >= len - eps {
            self.relax(w.v1, w.sigma + (w.src - V2::new(len, 0.0)).norm());
        }
        let Some(next_faces) = mesh.edge_faces.get(&EdgeKey::new(w.v0, w.v1)) else {
            return;
        };
        let p0 = mesh.positions[w.v0 as usize];
        let p1 = mesh.positions[w.v1 as usize];
        for &f2 in next_faces {
            if f2 == w.face {
                continue;
            }
            let face = mesh.faces[f2 as usize];
            let c = *face.iter().find(|&&x| x != w.v0 && x != w.v1).unwrap();
            let pc = mesh.positions[c as usize];
            let la = (pc - p0).norm();
            let lb = (pc - p1).norm();
            let cx = (la * la - lb * lb + len * len) / (2.0 * len);
            let cy = (la * la - cx * cx).max(0.0).sqrt();
            if cy <= 0.0 {
                continue;
            }
            let pc2 = V2::new(cx, cy);
            let origin = V2::zeros();
            let end = V2::new(len, 0.0);

            let mut span = Some((w.b0, w.b1));
            span = span.and_then(|s| self.trim_against(s, w, w.v0, origin, eps));
            span = span.and_then(|s| self.trim_against(s, w, w.v1, end, eps));
            span = span.and_then(|s| self.trim_against(s, w, c, pc2, eps));
            let Some((b0, b1)) = span else { continue };

            let src = w.src;
            // Where the ray through the apex crosses the edge.
            let bc = src.x + (cx - src.x) * (-src.y) / (cy - src.y);
            if bc >= b0 - eps && bc <= b1 + eps {
                self.relax(c, w.sigma + (src - pc2).norm());
            }
            if b0 < bc {
                let hi = b1.min(bc);
                let q0 = ray_hit(src, b0, origin, pc2);
                let q1 = if hi == bc { pc2 } else { ray_hit(src, hi, origin, pc2) };
                self.make_child(f2, (w.v0, origin), (c, pc2), (w.v1, end), q0, q1, w);
            }
            if b1 > bc {
                let lo = b0.max(bc);
                let q0 = if lo == bc { pc2 } else { ray_hit(src, lo, pc2, end) };
                let q1 = ray_hit(src, b1, pc2, end);
                self.make_child(f2, (w.v1, end), (c, pc2), (w.v0, origin), q0, q1, w);
            }
        }
    }

    /// Re-expresses the lit part `q0..q1` of edge `a -> b` (in the parent
    /// frame) as a window in the frame of that edge, living in face `f2`.
    #[allow(clippy::too_many_arguments)]
    fn make_child(&mut self, f2: u32, a: (u32, V2), b: (u32, V2), other: (u32, V2), q0: V2, q1: V2, parent: &Window) {
        let e = b.1 - a.1;
        let len = e.norm();
        if len == 0.0 {
            return;
        }
        let ex = e / len;
        let mut ey = V2::new(-ex.y, ex.x);
        if (other.1 - a.1).dot(&ey) > 0.0 {
            ey = -ey;
        }
        let local = |p: V2| V2::new((p - a.1).dot(&ex), (p - a.1).dot(&ey));
        let src = local(parent.src);
        if src.y >= -1e-14 * len {
            return;
        }
        let x0 = local(q0).x.clamp(0.0, len);
        let x1 = local(q1).x.clamp(0.0, len);
        let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        if hi <= lo {
            return;
        }
        let mut w = Window {
            face: f2,
            v0: a.0,
            v1: b.0,
            len,
            b0: lo,
            b1: hi,
            src,
            sigma: parent.sigma,
            src_vertex: parent.src_vertex,
        };
        let eps = REL_EPS * len;
        let mut span = Some((lo, hi));
        span = span.and_then(|s| self.trim_against(s, &w, a.0, V2::zeros(), eps));
        span = span.and_then(|s| self.trim_against(s, &w, b.0, V2::new(len, 0.0), eps));
        span = span.and_then(|s| self.trim_against(s, &w, other.0, local(other.1), eps));
        let Some((b0, b1)) = span else { return };
        w.b0 = b0;
        w.b1 = b1;
        self.enqueue(w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trim_keeps_all_when_vertex_is_far_worse() {
        let r = trim(0.0, 1.0, V2::new(0.5, -1.0), 0.0, V2::new(0.0, 0.0), 10.0, 1e-12);
        assert_eq!(r, Some((0.0, 1.0)));
    }

    #[test]
    fn trim_drops_window_dominated_by_vertex() {
        // Vertex at the left end with distance 0 beats a source 5 units away.
        assert_eq!(trim(0.0, 1.0, V2::new(0.5, -5.0), 0.0, V2::new(0.0, 0.0), 0.0, 1e-12), None);
    }

    #[test]
    fn trim_splits_at_bisector() {
        // Window source at (1,-1) and a vertex at the origin, both at distance 0:
        // the window wins where |P - (1,-1)| < |P|, i.e. x > 1 on y = 0.
        let (lo, hi) = trim(0.0, 3.0, V2::new(1.0, -1.0), 0.0, V2::new(0.0, 0.0), 0.0, 0.0).unwrap();
        assert!((lo - 1.0).abs() < 1e-12, "{lo}");
        assert_eq!(hi, 3.0);
    }
}
