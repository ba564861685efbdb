use std::collections::HashMap;

use crate::geom::{barycentric, point_segment_distance, Point};
use crate::mesh::{face_edges, EdgeKey, TriangleMesh};
use crate::spatial::TriangleBvh;
use crate::{Error, Result};

/// Relative tolerance (times the bounding-box diagonal) for snapping an
/// inserted point onto an existing vertex or edge.
const SNAP_REL_TOL: f64 = 1e-9;

/// A reference mesh refined so that a set of surface points are vertices.
#[derive(Debug, Clone)]
pub struct SteinerMesh {
    pub mesh: TriangleMesh,
    /// Mesh vertex for each inserted point.
    pub vertex_of: Vec<u32>,
    /// Location of each point after projection onto the surface.
    pub snapped: Vec<Point>,
}

/// Inserts `points` into `mesh` as Steiner vertices by splitting the faces
/// (or edges) they land on. Points off the surface are first projected to
/// their closest surface point. `face_hints` names the original face each
/// point was sampled from; wrong or missing hints fall back to a closest-point
/// search.
pub fn insert_points(mesh: &TriangleMesh, points: &[Point], face_hints: Option<&[u32]>) -> Result<SteinerMesh> {
    mesh.validate()?;
    if mesh.faces.is_empty() {
        return Err(Error::invalid("reference mesh has no faces"));
    }
    if let Some(h) = face_hints {
        if h.len() != points.len() {
            return Err(Error::Dimension(format!("{} face hints for {} points", h.len(), points.len())));
        }
    }
    let tol = SNAP_REL_TOL * mesh.bounding_box().diagonal().max(f64::MIN_POSITIVE);
    let bvh = TriangleBvh::new(mesh);
    let mut state = Refiner {
        vertices: mesh.vertices.clone(),
        faces: mesh.faces.clone(),
        origin: (0..mesh.face_count() as u32).collect(),
        children: (0..mesh.face_count() as u32).map(|f| vec![f]).collect(),
        edge_faces: mesh.edge_faces().clone(),
    };

    let mut vertex_of = Vec::with_capacity(points.len());
    let mut snapped = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let hinted = face_hints.and_then(|h| {
            let f = h[i] as usize;
            if f >= mesh.face_count() {
                return None;
            }
            let [a, b, c] = mesh.corners(f);
            let (q, _) = crate::geom::closest_point_on_triangle(p, &a, &b, &c);
            ((q - p).norm() <= tol).then_some((f as u32, q))
        });
        let (orig, q) = match hinted {
            Some(h) => h,
            None => {
                let hit = bvh.closest_point(p).expect("non-empty mesh");
                (hit.face, hit.point)
            }
        };
        let v = state.insert(orig, q, tol);
        vertex_of.push(v);
        snapped.push(state.vertices[v as usize]);
    }
    Ok(SteinerMesh {
        mesh: TriangleMesh::from_parts(state.vertices, state.faces),
        vertex_of,
        snapped,
    })
}

struct Refiner {
    vertices: Vec<Point>,
    faces: Vec<[u32; 3]>,
    origin: Vec<u32>,
    children: Vec<Vec<u32>>,
    edge_faces: HashMap<EdgeKey, Vec<u32>>,
}

impl Refiner {
    fn unlink(&mut self, f: u32) {
        for e in face_edges(&self.faces[f as usize]) {
            if let Some(list) = self.edge_faces.get_mut(&e) {
                list.retain(|&x| x != f);
                if list.is_empty() {
                    self.edge_faces.remove(&e);
                }
            }
        }
    }

    fn link(&mut self, f: u32) {
        for e in face_edges(&self.faces[f as usize]) {
            self.edge_faces.entry(e).or_default().push(f);
        }
    }

    fn replace(&mut self, f: u32, face: [u32; 3]) {
        self.unlink(f);
        self.faces[f as usize] = face;
        self.link(f);
    }

    fn add(&mut self, face: [u32; 3], origin: u32) -> u32 {
        let id = self.faces.len() as u32;
        self.faces.push(face);
        self.origin.push(origin);
        self.children[origin as usize].push(id);
        self.link(id);
        id
    }

    /// Inserts surface point `q` lying on original face `orig`; returns its vertex.
    fn insert(&mut self, orig: u32, q: Point, tol: f64) -> u32 {
        // Sub-face of `orig` that best contains q.
        let mut best = (f64::NEG_INFINITY, u32::MAX);
        for &c in &self.children[orig as usize] {
            let f = self.faces[c as usize];
            let bc = barycentric(&q, &self.vertices[f[0] as usize], &self.vertices[f[1] as usize], &self.vertices[f[2] as usize]);
            let score = bc[0].min(bc[1]).min(bc[2]);
            if score > best.0 {
                best = (score, c);
            }
        }
        let face_id = best.1;
        let f = self.faces[face_id as usize];
        let pts = [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ];
        if let Some(k) = (0..3).find(|&k| (pts[k] - q).norm() <= tol) {
            return f[k];
        }
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let (d, t) = point_segment_distance(&q, &pts[k], &pts[(k + 1) % 3]);
            if d <= tol {
                let on_edge = Point::from(pts[k].coords * (1.0 - t) + pts[(k + 1) % 3].coords * t);
                return self.split_edge(a, b, on_edge);
            }
        }
        let v = self.vertices.len() as u32;
        self.vertices.push(q);
        let origin = self.origin[face_id as usize];
        self.replace(face_id, [f[0], f[1], v]);
        self.add([f[1], f[2], v], origin);
        self.add([f[2], f[0], v], origin);
        v
    }

    fn split_edge(&mut self, a: u32, b: u32, p: Point) -> u32 {
        let v = self.vertices.len() as u32;
        self.vertices.push(p);
        let incident = self.edge_faces.get(&EdgeKey::new(a, b)).cloned().unwrap_or_default();
        for h in incident {
            let face = self.faces[h as usize];
            let mut first = face;
            let mut second = face;
            for k in 0..3 {
                if face[k] == b {
                    first[k] = v;
                }
                if face[k] == a {
                    second[k] = v;
                }
            }
            let origin = self.origin[h as usize];
            self.replace(h, first);
            self.add(second, origin);
        }
        v
    }
}
