//! Uniform hash grid over accepted triangles for overlap queries.

use std::collections::HashMap;

use crate::geom::Aabb;

/// Triangles whose box spans more cells than this go to a shared list.
const MAX_CELLS: i64 = 64;

#[derive(Debug, Clone)]
pub(crate) struct TriangleGrid {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
    large: Vec<u32>,
    boxes: Vec<Aabb>,
    stamp: Vec<u32>,
    query_id: u32,
}

impl TriangleGrid {
    pub(crate) fn new(cell: f64) -> Self {
        TriangleGrid {
            cell: if cell > 0.0 && cell.is_finite() { cell } else { 1.0 },
            cells: HashMap::new(),
            large: Vec::new(),
            boxes: Vec::new(),
            stamp: Vec::new(),
            query_id: 0,
        }
    }

    fn range(&self, b: &Aabb) -> ([i64; 3], [i64; 3], i64) {
        let lo: [i64; 3] = std::array::from_fn(|k| (b.min[k] / self.cell).floor() as i64);
        let hi: [i64; 3] = std::array::from_fn(|k| (b.max[k] / self.cell).floor() as i64);
        let count = (0..3).map(|k| hi[k] - lo[k] + 1).product();
        (lo, hi, count)
    }

    pub(crate) fn insert(&mut self, b: Aabb) -> u32 {
        let id = self.boxes.len() as u32;
        self.boxes.push(b);
        self.stamp.push(0);
        let (lo, hi, count) = self.range(&b);
        if count > MAX_CELLS {
            self.large.push(id);
            return id;
        }
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    self.cells.entry([x, y, z]).or_default().push(id);
                }
            }
        }
        id
    }

    /// Ids of stored triangles whose boxes overlap `b`, ascending.
    pub(crate) fn query(&mut self, b: &Aabb) -> Vec<u32> {
        self.query_id += 1;
        let q = self.query_id;
        let mut out = Vec::new();
        let (lo, hi, count) = self.range(b);
        if count > MAX_CELLS {
            out.extend((0..self.boxes.len() as u32).filter(|&i| self.boxes[i as usize].overlaps(b)));
            return out;
        }
        let TriangleGrid {
            cells,
            large,
            boxes,
            stamp,
            ..
        } = self;
        let mut visit = |id: u32, out: &mut Vec<u32>| {
            if stamp[id as usize] != q && boxes[id as usize].overlaps(b) {
                stamp[id as usize] = q;
                out.push(id);
            }
        };
        for &id in large.iter() {
            visit(id, &mut out);
        }
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(ids) = cells.get(&[x, y, z]) {
                        for &id in ids {
                            visit(id, &mut out);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}
