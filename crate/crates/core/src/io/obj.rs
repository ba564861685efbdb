use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::geom::Point;
use crate::mesh::TriangleMesh;
use crate::{Error, Result};

use super::format_significant;

/// Reads `v` and `f` records. Quads are split into two triangles at their
/// first vertex; larger polygons, lines and points are rejected.
pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path)?;
    parse_obj(&text, path)
}

pub(crate) fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        match tag {
            "v" => {
                let mut xyz = [0.0f64; 3];
                for c in &mut xyz {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| Error::parse(path, line, "vertex record needs three coordinates"))?;
                    *c = tok
                        .parse()
                        .map_err(|_| Error::parse(path, line, format!("bad coordinate {tok:?}")))?;
                }
                vertices.push(Point::new(xyz[0], xyz[1], xyz[2]));
            }
            "f" => {
                let mut poly = Vec::with_capacity(4);
                for tok in tokens {
                    let idx_str = tok.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str
                        .parse()
                        .map_err(|_| Error::parse(path, line, format!("bad face index {tok:?}")))?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        return Err(Error::parse(path, line, "face index 0 is invalid in OBJ"));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(Error::parse(
                            path,
                            line,
                            format!("face index {idx} out of range ({} vertices so far)", vertices.len()),
                        ));
                    }
                    poly.push(resolved as u32);
                }
                match poly.len() {
                    3 => faces.push([poly[0], poly[1], poly[2]]),
                    4 => {
                        faces.push([poly[0], poly[1], poly[2]]);
                        faces.push([poly[0], poly[2], poly[3]]);
                    }
                    n if n < 3 => {
                        return Err(Error::parse(path, line, format!("face with {n} vertices")))
                    }
                    n => {
                        return Err(Error::parse(
                            path,
                            line,
                            format!("unsupported {n}-gon (only triangles and quads)"),
                        ))
                    }
                }
            }
            "l" | "p" | "curv" | "surf" => {
                return Err(Error::parse(path, line, format!("unsupported primitive {tag:?}")))
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Writes `v`/`f` records with 9 significant digits per coordinate.
pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    fs::write(path, obj_string(mesh))?;
    Ok(())
}

pub(crate) fn obj_string(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.vertex_count() * 40 + mesh.face_count() * 24);
    for v in &mesh.vertices {
        let _ = writeln!(
            out,
            "v {} {} {}",
            format_significant(v.x, 9),
            format_significant(v.y, 9),
            format_significant(v.z, 9)
        );
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<TriangleMesh> {
        parse_obj(s, Path::new("test.obj"))
    }

    #[test]
    fn minimal_triangle() {
        let m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn quad_is_fan_split() {
        let m = parse("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn negative_indices() {
        let m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn truncated_vertex_names_line() {
        let err = parse("v 0 0 0\nv 1 0 0\nv 0 1").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        assert!(parse("v 0 0 0\nv 1 0 0\nv 0 1").unwrap_err().to_string().contains("test.obj:3"));
    }

    #[test]
    fn pentagon_and_lines_rejected() {
        let five = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 2 0\nf 1 2 3 4 5\n";
        assert!(parse(five).is_err());
        assert!(parse("v 0 0 0\nv 1 0 0\nl 1 2\n").is_err());
    }

    #[test]
    fn round_trip_keeps_nine_digits() {
        let m = parse("v 0.123456789 -2.5 1e-7\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        let back = parse(&obj_string(&m)).unwrap();
        assert_eq!(back, m);
    }
}
