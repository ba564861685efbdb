use crate::geom::{closest_point_on_triangle, Aabb, Point};
use crate::mesh::TriangleMesh;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bbox: Aabb,
    start: u32,
    end: u32,
    left: u32,
    right: u32,
}

/// Bounding volume hierarchy over the faces of a mesh, for exact
/// closest-point and box-overlap queries.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    tris: Vec<[Point; 3]>,
    boxes: Vec<Aabb>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub face: u32,
    pub point: Point,
    pub barycentric: [f64; 3],
    pub distance_squared: f64,
}

impl TriangleBvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let tris: Vec<[Point; 3]> = (0..mesh.face_count()).map(|f| mesh.corners(f)).collect();
        Self::from_triangles(tris)
    }

    pub fn from_triangles(tris: Vec<[Point; 3]>) -> Self {
        let boxes = tris.iter().map(|t| Aabb::from_points(t.iter())).collect();
        let mut bvh = TriangleBvh {
            order: (0..tris.len() as u32).collect(),
            tris,
            boxes,
            nodes: Vec::new(),
        };
        if !bvh.tris.is_empty() {
            bvh.build(0, bvh.tris.len());
        }
        bvh
    }

    pub fn len(&self) -> usize {
        self.tris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn triangle(&self, i: u32) -> &[Point; 3] {
        &self.tris[i as usize]
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let mut bbox = Aabb::empty();
        let mut cbox = Aabb::empty();
        for &i in &self.order[start..end] {
            bbox = bbox.merge(&self.boxes[i as usize]);
            cbox.grow(&self.boxes[i as usize].center());
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            bbox,
            start: start as u32,
            end: end as u32,
            left: u32::MAX,
            right: u32::MAX,
        });
        if end - start > LEAF_SIZE {
            let axis = cbox.longest_axis();
            let mid = (start + end) / 2;
            let boxes = &self.boxes;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                boxes[a as usize].center()[axis]
                    .total_cmp(&boxes[b as usize].center()[axis])
                    .then(a.cmp(&b))
            });
            let l = self.build(start, mid);
            let r = self.build(mid, end);
            self.nodes[id as usize].left = l;
            self.nodes[id as usize].right = r;
        }
        id
    }

    /// Exact closest point on any triangle. Ties go to the lowest face index.
    pub fn closest_point(&self, p: &Point) -> Option<ClosestHit> {
        if self.tris.is_empty() {
            return None;
        }
        let mut best: Option<ClosestHit> = None;
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            let bound = best.map_or(f64::INFINITY, |b| b.distance_squared);
            if node.bbox.distance_squared(p) > bound {
                continue;
            }
            if node.left == u32::MAX {
                for &fi in &self.order[node.start as usize..node.end as usize] {
                    let [a, b, c] = &self.tris[fi as usize];
                    let (q, bary) = closest_point_on_triangle(p, a, b, c);
                    let d2 = (q - p).norm_squared();
                    let better = match best {
                        None => true,
                        Some(h) => d2 < h.distance_squared || (d2 == h.distance_squared && fi < h.face),
                    };
                    if better {
                        best = Some(ClosestHit {
                            face: fi,
                            point: q,
                            barycentric: bary,
                            distance_squared: d2,
                        });
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = self.nodes[l as usize].bbox.distance_squared(p);
                let dr = self.nodes[r as usize].bbox.distance_squared(p);
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }

    /// Euclidean distance from `p` to the triangle set.
    pub fn distance(&self, p: &Point) -> f64 {
        self.closest_point(p)
            .map_or(f64::INFINITY, |h| h.distance_squared.sqrt())
    }

    /// Faces whose bounding boxes overlap `query`, ascending.
    pub fn overlapping(&self, query: &Aabb) -> Vec<u32> {
        let mut out = Vec::new();
        if self.tris.is_empty() {
            return out;
        }
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if !node.bbox.overlaps(query) {
                continue;
            }
            if node.left == u32::MAX {
                out.extend(
                    self.order[node.start as usize..node.end as usize]
                        .iter()
                        .filter(|&&f| self.boxes[f as usize].overlaps(query)),
                );
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        out.sort_unstable();
        out
    }
}
