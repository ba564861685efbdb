//! Mesh and point-cloud file formats.
//!
//! OBJ is the canonical mesh format (read and write). PLY (ASCII or binary
//! little-endian) is accepted for meshes on input and is the default point
//! cloud format. XYZ text holds one point per line, optionally followed by
//! its normal.

mod obj;
mod ply;
mod xyz;

use std::path::Path;

pub use obj::{read_obj, write_obj};
pub use ply::{read_ply, write_cloud_ply, PlyData};
pub use xyz::{read_xyz, write_xyz};

use crate::mesh::{PointCloud, TriangleMesh};
use crate::{Error, Result};

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default()
}

/// Loads an OBJ or PLY mesh, chosen by file extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "obj" => read_obj(path),
        "ply" => read_ply(path)?.into_mesh(path),
        other => Err(Error::invalid(format!(
            "unsupported mesh format {other:?} for {} (expected .obj or .ply)",
            path.display()
        ))),
    }
}

/// Writes a mesh as OBJ. Only the `.obj` extension is accepted.
pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if extension(path) != "obj" {
        return Err(Error::invalid(format!(
            "meshes are written as OBJ; got {}",
            path.display()
        )));
    }
    write_obj(mesh, path)
}

/// Loads a point cloud from PLY, XYZ, or the vertex records of an OBJ.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let pc = match extension(path).as_str() {
        "ply" => read_ply(path)?.into_cloud(),
        "xyz" | "txt" => read_xyz(path)?,
        "obj" => PointCloud::new(read_obj(path)?.vertices),
        other => {
            return Err(Error::invalid(format!(
                "unsupported point cloud format {other:?} for {}",
                path.display()
            )))
        }
    };
    pc.validate()?;
    Ok(pc)
}

/// Writes a point cloud as PLY or XYZ, chosen by file extension.
pub fn save_cloud(pc: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "ply" => write_cloud_ply(pc, path),
        "xyz" | "txt" => write_xyz(pc, path),
        other => Err(Error::invalid(format!(
            "unsupported point cloud format {other:?} for {}",
            path.display()
        ))),
    }
}

/// Formats `x` with at most `digits` significant digits, like C's `%.*g`.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(0.0, 9), "0");
        assert_eq!(format_significant(1.0, 9), "1");
        assert_eq!(format_significant(-0.5, 9), "-0.5");
        assert_eq!(format_significant(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_significant(123456.7891234, 9), "123456.789");
        assert_eq!(format_significant(1.5e-7, 9), "1.5e-07");
        assert_eq!(format_significant(2.0e12, 9), "2e+12");
        assert_eq!(format_significant(0.00012345678912, 9), "0.000123456789");
    }
}
