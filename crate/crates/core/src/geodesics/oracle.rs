use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use super::GeodesicResult;
use crate::geom::Point;
use crate::mesh::{EdgeKey, TriangleMesh};
use crate::spatial::dist2;
use crate::{Error, Result};

#[derive(PartialEq)]
struct Item(f64, u32);
impl Eq for Item {}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Upper bound on geodesic distance: Dijkstra over a graph whose nodes are
/// the points of a `2^subdivision` barycentric grid on every face, with every
/// pair of nodes on a common face connected by a straight segment.
///
/// Refining by one level adds nodes and edges without removing any, so the
/// result is non-increasing in `subdivision`.
pub fn oracle_geodesics(mesh: &TriangleMesh, source: u32, targets: &[u32], subdivision: u32) -> Result<GeodesicResult> {
    mesh.validate()?;
    if subdivision == 0 || subdivision > 8 {
        return Err(Error::invalid(format!("subdivision must be in 1..=8, got {subdivision}")));
    }
    let n = mesh.vertex_count() as u32;
    if source >= n || targets.iter().any(|&t| t >= n) {
        return Err(Error::invalid("source or target vertex out of range"));
    }
    let m = 1usize << subdivision;

    let mut positions: Vec<Point> = mesh.vertices.clone();
    let mut edge_nodes: HashMap<EdgeKey, u32> = HashMap::new();
    let per_face = (m + 1) * (m + 2) / 2;
    let mut face_nodes: Vec<u32> = Vec::with_capacity(mesh.face_count() * per_face);
    for f in &mesh.faces {
        let p = [
            mesh.vertices[f[0] as usize],
            mesh.vertices[f[1] as usize],
            mesh.vertices[f[2] as usize],
        ];
        for i in 0..=m {
            for j in 0..=(m - i) {
                let k = m - i - j;
                let w = [i, j, k];
                let zeros = w.iter().filter(|&&x| x == 0).count();
                let id = match zeros {
                    2 => f[w.iter().position(|&x| x == m).unwrap()],
                    1 => {
                        let z = w.iter().position(|&x| x == 0).unwrap();
                        let (ea, eb) = ((z + 1) % 3, (z + 2) % 3);
                        let (va, vb) = (f[ea], f[eb]);
                        // Steps from the lower-index endpoint.
                        let t = if va < vb { w[eb] } else { w[ea] };
                        let key = EdgeKey::new(va, vb);
                        let base = *edge_nodes.entry(key).or_insert_with(|| {
                            let (lo, hi) = (positions[key.lo() as usize], positions[key.hi() as usize]);
                            let start = positions.len() as u32;
                            for s in 1..m {
                                let a = s as f64 / m as f64;
                                positions.push(Point::from(lo.coords * (1.0 - a) + hi.coords * a));
                            }
                            start
                        });
                        base + (t as u32 - 1)
                    }
                    _ => {
                        let pt = (p[0].coords * i as f64 + p[1].coords * j as f64 + p[2].coords * k as f64) / m as f64;
                        positions.push(Point::from(pt));
                        positions.len() as u32 - 1
                    }
                };
                face_nodes.push(id);
            }
        }
    }

    let mut node_faces: Vec<Vec<u32>> = vec![Vec::new(); positions.len()];
    for (fi, chunk) in face_nodes.chunks(per_face).enumerate() {
        for &id in chunk {
            if node_faces[id as usize].last() != Some(&(fi as u32)) {
                node_faces[id as usize].push(fi as u32);
            }
        }
    }

    let mut dist = vec![f64::INFINITY; positions.len()];
    let mut done = vec![false; positions.len()];
    let mut remaining: usize = {
        let mut t: Vec<u32> = targets.to_vec();
        t.sort_unstable();
        t.dedup();
        t.len()
    };
    let is_target: std::collections::HashSet<u32> = targets.iter().copied().collect();
    let mut heap = BinaryHeap::new();
    dist[source as usize] = 0.0;
    heap.push(Item(0.0, source));
    while let Some(Item(d, u)) = heap.pop() {
        if done[u as usize] {
            continue;
        }
        done[u as usize] = true;
        if is_target.contains(&u) {
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
        let pu = positions[u as usize];
        for &f in &node_faces[u as usize] {
            for &w in &face_nodes[f as usize * per_face..(f as usize + 1) * per_face] {
                if done[w as usize] {
                    continue;
                }
                let nd = d + dist2(&pu, &positions[w as usize]).sqrt();
                if nd < dist[w as usize] {
                    dist[w as usize] = nd;
                    heap.push(Item(nd, w));
                }
            }
        }
    }
    let distances: BTreeMap<u32, f64> = targets.iter().map(|&t| (t, dist[t as usize])).collect();
    Ok(GeodesicResult { source, distances })
}
