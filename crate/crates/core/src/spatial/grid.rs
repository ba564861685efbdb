use rayon::prelude::*;

use crate::geom::{closest_point_on_triangle, Aabb, Point};

use super::TriangleBvh;

/// Largest number of cells a [`DistanceGrid`] allocates.
const MAX_CELLS: usize = 1 << 24;

/// Exact point-to-surface distances, accelerated near the surface.
///
/// Each cell within `reach` of a triangle keeps every triangle that can be
/// nearest to some point of the cell, so a query scans a short list instead
/// of walking the tree. Points elsewhere fall back to the BVH.
#[derive(Debug, Clone)]
pub struct DistanceGrid<'a> {
    bvh: &'a TriangleBvh,
    origin: Point,
    cell: f64,
    dims: [usize; 3],
    /// Cell `c` owns `lists[offsets[c]..offsets[c + 1]]`; empty means unfilled.
    offsets: Vec<u32>,
    lists: Vec<u32>,
}

impl<'a> DistanceGrid<'a> {
    pub fn new(bvh: &'a TriangleBvh, cell: f64, reach: f64) -> Self {
        let mut bounds = Aabb::empty();
        for i in 0..bvh.len() {
            bounds = bounds.merge(&Aabb::from_points(bvh.triangle(i as u32)));
        }
        let bounds = if bounds.is_empty() { bounds } else { bounds.expanded(reach.max(0.0)) };
        let mut cell = cell;
        let extent = if bounds.is_empty() { [0.0; 3] } else { (0..3).map(|i| bounds.max[i] - bounds.min[i]).collect::<Vec<_>>().try_into().unwrap() };
        let dims_for = |cell: f64| extent.map(|e| ((e / cell).ceil() as usize).max(1));
        if !(cell > 0.0 && cell.is_finite()) || bounds.is_empty() {
            return DistanceGrid {
                bvh,
                origin: Point::origin(),
                cell: 1.0,
                dims: [0; 3],
                offsets: vec![0],
                lists: Vec::new(),
            };
        }
        while dims_for(cell).iter().product::<usize>() > MAX_CELLS {
            cell *= 1.5;
        }
        let dims = dims_for(cell);
        let origin = bounds.min;
        let mut grid = DistanceGrid {
            bvh,
            origin,
            cell,
            dims,
            offsets: Vec::new(),
            lists: Vec::new(),
        };

        let mut marked: Vec<usize> = Vec::new();
        for i in 0..bvh.len() {
            let b = Aabb::from_points(bvh.triangle(i as u32)).expanded(reach);
            let (lo, hi) = (grid.coords(&b.min), grid.coords(&b.max));
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        marked.push(grid.index([x, y, z]));
                    }
                }
            }
        }
        marked.sort_unstable();
        marked.dedup();
        let filled: Vec<(usize, Vec<u32>)> = marked.into_par_iter().map(|c| (c, grid.candidates_for(c))).collect();
        let mut offsets = vec![0u32; dims.iter().product::<usize>() + 1];
        let mut lists = Vec::new();
        let mut next = filled.iter().peekable();
        for c in 0..offsets.len() - 1 {
            if let Some((_, list)) = next.next_if(|(fc, _)| *fc == c) {
                lists.extend_from_slice(list);
            }
            offsets[c + 1] = lists.len() as u32;
        }
        grid.offsets = offsets;
        grid.lists = lists;
        grid
    }

    fn coords(&self, p: &Point) -> [usize; 3] {
        [0, 1, 2].map(|i| (((p[i] - self.origin[i]) / self.cell).floor().max(0.0) as usize).min(self.dims[i] - 1))
    }

    fn index(&self, [x, y, z]: [usize; 3]) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + z
    }

    /// Triangles that may be nearest to a point of cell `c`: the nearest
    /// triangle to any such point lies within the centre's distance plus
    /// the cell's half-diagonal of that point.
    fn candidates_for(&self, c: usize) -> Vec<u32> {
        let z = c % self.dims[2];
        let y = (c / self.dims[2]) % self.dims[1];
        let x = c / (self.dims[1] * self.dims[2]);
        let min = Point::new(
            self.origin.x + x as f64 * self.cell,
            self.origin.y + y as f64 * self.cell,
            self.origin.z + z as f64 * self.cell,
        );
        let max = min + nalgebra::Vector3::repeat(self.cell);
        let cell_box = Aabb { min, max };
        let centre = cell_box.center();
        let half = 0.5 * self.cell * 3f64.sqrt();
        let reach = (self.bvh.distance(&centre) + half) * (1.0 + 1e-9) + 1e-12;
        self.bvh
            .overlapping(&cell_box.expanded(reach))
            .into_iter()
            .filter(|&t| {
                let [a, b, c] = self.bvh.triangle(t);
                (closest_point_on_triangle(&centre, a, b, c).0 - centre).norm() <= reach + half
            })
            .collect()
    }

    /// Distance from `p` to the nearest triangle, identical to
    /// [`TriangleBvh::distance`].
    pub fn distance(&self, p: &Point) -> f64 {
        let inside = (0..3).all(|i| {
            let t = (p[i] - self.origin[i]) / self.cell;
            t >= 0.0 && t < self.dims[i] as f64
        });
        if inside {
            let c = self.index(self.coords(p));
            let list = &self.lists[self.offsets[c] as usize..self.offsets[c + 1] as usize];
            if !list.is_empty() {
                return list
                    .iter()
                    .map(|&t| {
                        let [a, b, c] = self.bvh.triangle(t);
                        (closest_point_on_triangle(p, a, b, c).0 - p).norm_squared()
                    })
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
            }
        }
        self.bvh.distance(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_bvh_distances() {
        let mesh = shapes::torus(0.35, 0.15, 24, 12);
        let bvh = TriangleBvh::new(&mesh);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for (cell, reach) in [(0.01, 0.05), (0.05, 0.02), (0.2, 0.0)] {
            let grid = DistanceGrid::new(&bvh, cell, reach);
            for _ in 0..5000 {
                let p = Point::new(rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7), rng.random_range(-0.3..0.3));
                assert_eq!(grid.distance(&p), bvh.distance(&p));
            }
        }
    }
}
