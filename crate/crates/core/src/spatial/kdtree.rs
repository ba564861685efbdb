use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::{Aabb, Point};

use super::dist2;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
struct Node {
    bbox: Aabb,
    start: u32,
    end: u32,
    /// Child node indices; `u32::MAX` for leaves.
    left: u32,
    right: u32,
}

/// Static k-d tree with exact queries. Ties in distance are broken toward
/// the smaller point index, matching a brute-force scan.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    d2: f64,
    idx: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    pub fn new(points: &[Point]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let bbox = Aabb::from_points(self.order[start..end].iter().map(|&i| &self.points[i as usize]));
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            bbox,
            start: start as u32,
            end: end as u32,
            left: u32::MAX,
            right: u32::MAX,
        });
        if end - start > LEAF_SIZE && bbox.diagonal() > 0.0 {
            let axis = bbox.longest_axis();
            let mid = (start + end) / 2;
            let pts = &self.points;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                pts[a as usize][axis]
                    .total_cmp(&pts[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let l = self.build(start, mid);
            let r = self.build(mid, end);
            self.nodes[id as usize].left = l;
            self.nodes[id as usize].right = r;
        }
        id
    }

    /// The `k` nearest points to `query`, sorted by `(distance, index)`.
    /// `exclude` removes one index (typically the query point itself).
    pub fn knn(&self, query: &Point, k: usize, exclude: Option<u32>) -> Vec<(u32, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Entry> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if heap.len() == k && node.bbox.distance_squared(query) > heap.peek().unwrap().d2 {
                continue;
            }
            if node.left == u32::MAX {
                for &i in &self.order[node.start as usize..node.end as usize] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let e = Entry {
                        d2: dist2(query, &self.points[i as usize]),
                        idx: i,
                    };
                    if heap.len() < k {
                        heap.push(e);
                    } else if e < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(e);
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = self.nodes[l as usize].bbox.distance_squared(query);
                let dr = self.nodes[r as usize].bbox.distance_squared(query);
                // Visit the nearer child first.
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        let mut out: Vec<(u32, f64)> = heap.into_iter().map(|e| (e.idx, e.d2)).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Nearest point as `(index, squared distance)`.
    pub fn nearest(&self, query: &Point) -> Option<(u32, f64)> {
        self.knn(query, 1, None).into_iter().next()
    }

    /// Indices of all points with squared distance `<= radius^2`, ascending.
    pub fn within_radius(&self, query: &Point, radius: f64) -> Vec<u32> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        if self.points.is_empty() {
            return out;
        }
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bbox.distance_squared(query) > r2 {
                continue;
            }
            if node.left == u32::MAX {
                for &i in &self.order[node.start as usize..node.end as usize] {
                    if dist2(query, &self.points[i as usize]) <= r2 {
                        out.push(i);
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        out.sort_unstable();
        out
    }
}
