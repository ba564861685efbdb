use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::geom::{Point, Vector};
use crate::mesh::PointCloud;
use crate::{Error, Result};

/// Reads `x y z` or `x y z nx ny nz` lines. All lines must have the same arity.
pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut arity = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, i + 1, "bad number"))?;
        if vals.len() != 3 && vals.len() != 6 {
            return Err(Error::parse(path, i + 1, format!("expected 3 or 6 values, got {}", vals.len())));
        }
        if *arity.get_or_insert(vals.len()) != vals.len() {
            return Err(Error::parse(path, i + 1, "inconsistent number of values per line"));
        }
        points.push(Point::new(vals[0], vals[1], vals[2]));
        if vals.len() == 6 {
            normals.push(Vector::new(vals[3], vals[4], vals[5]));
        }
    }
    let has_normals = arity == Some(6);
    Ok(PointCloud {
        points,
        normals: has_normals.then_some(normals),
        face_ids: None,
    })
}

pub fn write_xyz(pc: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (i, p) in pc.points.iter().enumerate() {
        let _ = write!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
        if let Some(n) = &pc.normals {
            let _ = write!(out, " {:?} {:?} {:?}", n[i].x, n[i].y, n[i].z);
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
