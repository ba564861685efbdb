//! Indexed triangle meshes and point clouds.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use crate::geom::{triangle_area, Aabb, Point, Vector};
use crate::{Error, Result};

/// Unordered vertex pair with the smaller index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey(u32, u32);

impl EdgeKey {
    pub fn new(a: u32, b: u32) -> Self {
        if a <= b {
            EdgeKey(a, b)
        } else {
            EdgeKey(b, a)
        }
    }

    pub fn lo(&self) -> u32 {
        self.0
    }

    pub fn hi(&self) -> u32 {
        self.1
    }

    pub fn contains(&self, v: u32) -> bool {
        self.0 == v || self.1 == v
    }
}

/// The three edges of a face.
pub fn face_edges(f: &[u32; 3]) -> [EdgeKey; 3] {
    [
        EdgeKey::new(f[0], f[1]),
        EdgeKey::new(f[1], f[2]),
        EdgeKey::new(f[2], f[0]),
    ]
}

/// Edge -> incident face indices.
pub type EdgeFaceMap = HashMap<EdgeKey, Vec<u32>>;

/// Indexed triangle mesh. Adjacency is derived on first use and cached.
#[derive(Debug, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<[u32; 3]>,
    adjacency: OnceLock<EdgeFaceMap>,
}

impl Clone for TriangleMesh {
    fn clone(&self) -> Self {
        TriangleMesh::from_parts(self.vertices.clone(), self.faces.clone())
    }
}

impl PartialEq for TriangleMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.faces == other.faces
    }
}

impl TriangleMesh {
    /// Builds a mesh, checking that every face index is in range.
    pub fn new(vertices: Vec<Point>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = TriangleMesh::from_parts(vertices, faces);
        mesh.validate()?;
        Ok(mesh)
    }

    pub(crate) fn from_parts(vertices: Vec<Point>, faces: Vec<[u32; 3]>) -> Self {
        TriangleMesh {
            vertices,
            faces,
            adjacency: OnceLock::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i as usize >= n) {
                return Err(Error::IndexOutOfRange {
                    face: fi,
                    index: bad as usize,
                    vertex_count: n,
                });
            }
        }
        if let Some(i) = self.vertices.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("vertex {i} has a non-finite coordinate")));
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn corners(&self, face: usize) -> [Point; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.corners(face);
        triangle_area(&a, &b, &c)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Edge to incident-face map, built once.
    pub fn edge_faces(&self) -> &EdgeFaceMap {
        self.adjacency.get_or_init(|| build_edge_faces(&self.faces))
    }

    /// Edges with more than two incident faces.
    pub fn non_manifold_edges(&self) -> BTreeSet<EdgeKey> {
        self.edge_faces()
            .iter()
            .filter(|(_, fs)| fs.len() > 2)
            .map(|(e, _)| *e)
            .collect()
    }

    /// Edges with exactly one incident face.
    pub fn boundary_edges(&self) -> BTreeSet<EdgeKey> {
        self.edge_faces()
            .iter()
            .filter(|(_, fs)| fs.len() == 1)
            .map(|(e, _)| *e)
            .collect()
    }

    /// Per-vertex list of incident faces.
    pub fn vertex_faces(&self) -> Vec<Vec<u32>> {
        let mut vf = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                vf[v as usize].push(fi as u32);
            }
        }
        vf
    }

    /// Applies `p -> (p + translation) * scale` to every vertex.
    pub fn transformed(&self, scale: f64, translation: Vector) -> TriangleMesh {
        let vertices = self
            .vertices
            .iter()
            .map(|p| Point::from((p.coords + translation) * scale))
            .collect();
        TriangleMesh::from_parts(vertices, self.faces.clone())
    }
}

pub(crate) fn build_edge_faces(faces: &[[u32; 3]]) -> EdgeFaceMap {
    let mut map: EdgeFaceMap = HashMap::with_capacity(faces.len() * 3 / 2);
    for (fi, f) in faces.iter().enumerate() {
        for e in face_edges(f) {
            map.entry(e).or_default().push(fi as u32);
        }
    }
    map
}

/// Edges with more than two incident faces.
pub fn non_manifold_edges(mesh: &TriangleMesh) -> BTreeSet<EdgeKey> {
    mesh.non_manifold_edges()
}

/// Similarity transform applied by [`normalize`]: `p' = (p + translation) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub scale: f64,
    pub translation: Vector,
}

impl Normalization {
    pub fn apply(&self, p: &Point) -> Point {
        Point::from((p.coords + self.translation) * self.scale)
    }

    pub fn invert(&self, p: &Point) -> Point {
        Point::from(p.coords / self.scale - self.translation)
    }
}

/// Centers the bounding box at the origin and scales its diagonal to 1.
pub fn normalize(mesh: &TriangleMesh) -> Result<(TriangleMesh, Normalization)> {
    if mesh.vertices.is_empty() {
        return Err(Error::invalid("cannot normalize an empty mesh"));
    }
    let bb = mesh.bounding_box();
    let diag = bb.diagonal();
    if !(diag > 0.0) {
        return Err(Error::Degenerate(
            "mesh bounding box has zero extent".into(),
        ));
    }
    let t = Normalization {
        scale: 1.0 / diag,
        translation: -bb.center().coords,
    };
    Ok((mesh.transformed(t.scale, t.translation), t))
}

/// Points with optional unit normals and optional source-face provenance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub normals: Option<Vec<Vector>>,
    /// Index of the reference-mesh face each point was sampled from, if known.
    pub face_ids: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud {
            points,
            normals: None,
            face_ids: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(Error::Dimension(format!(
                    "{} normals for {} points",
                    normals.len(),
                    self.points.len()
                )));
            }
            if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > 1e-6) {
                return Err(Error::invalid(format!("normal {i} is not unit length")));
            }
        }
        if let Some(ids) = &self.face_ids {
            if ids.len() != self.points.len() {
                return Err(Error::Dimension(format!(
                    "{} face ids for {} points",
                    ids.len(),
                    self.points.len()
                )));
            }
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    #[test]
    fn edge_key_is_canonical() {
        assert_eq!(EdgeKey::new(4, 1), EdgeKey::new(1, 4));
        assert_eq!(EdgeKey::new(4, 1).lo(), 1);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let err = TriangleMesh::new(vec![p(0., 0., 0.), p(1., 0., 0.)], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 2, .. }));
    }

    #[test]
    fn non_manifold_detection() {
        let verts = vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(0., -1., 0.), p(0., 0., 1.)];
        let two = TriangleMesh::new(verts.clone(), vec![[0, 1, 2], [1, 0, 3]]).unwrap();
        assert!(two.non_manifold_edges().is_empty());
        let three = TriangleMesh::new(verts, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap();
        assert_eq!(three.non_manifold_edges().into_iter().collect::<Vec<_>>(), vec![EdgeKey::new(0, 1)]);
        assert!(TriangleMesh::default().non_manifold_edges().is_empty());
    }

    #[test]
    fn normalize_unit_cube() {
        let mut verts = Vec::new();
        for i in 0..8 {
            verts.push(p((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
        }
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [5, 6, 7]]).unwrap();
        let (out, t) = normalize(&mesh).unwrap();
        assert!((t.scale - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((out.bounding_box().diagonal() - 1.0).abs() < 1e-12);
        assert!(out.bounding_box().center().coords.norm() < 1e-15);
        let back = t.invert(&out.vertices[7]);
        assert!((back - p(1., 1., 1.)).norm() < 1e-12);

        let (again, t2) = normalize(&out).unwrap();
        assert!((t2.scale - 1.0).abs() < 1e-12);
        assert!(t2.translation.norm() < 1e-12);
        assert!(again.vertices.iter().zip(&out.vertices).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn normalize_rejects_degenerate() {
        let single = TriangleMesh::new(vec![p(1., 2., 3.)], vec![]).unwrap();
        assert!(normalize(&single).is_err());
        assert!(normalize(&TriangleMesh::default()).is_err());
    }

    #[test]
    fn cloud_normals_must_be_unit() {
        let mut pc = PointCloud::new(vec![p(0., 0., 0.)]);
        pc.normals = Some(vec![Vector::new(0., 0., 2.)]);
        assert!(pc.validate().is_err());
        pc.normals = Some(vec![Vector::new(0., 0., 1.)]);
        assert!(pc.validate().is_ok());
    }
}
