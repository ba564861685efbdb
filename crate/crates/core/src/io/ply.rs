use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::geom::{Point, Vector};
use crate::mesh::{PointCloud, TriangleMesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Vertex and face records extracted from a PLY file.
#[derive(Debug, Clone, Default)]
pub struct PlyData {
    pub vertices: Vec<Point>,
    pub normals: Option<Vec<Vector>>,
    pub face_ids: Option<Vec<u32>>,
    pub polygons: Vec<Vec<u32>>,
}

impl PlyData {
    /// Triangulates quads (fan at the first corner); larger polygons are rejected.
    pub fn into_mesh(self, path: &Path) -> Result<TriangleMesh> {
        let mut faces = Vec::with_capacity(self.polygons.len());
        for (i, poly) in self.polygons.iter().enumerate() {
            match poly.len() {
                3 => faces.push([poly[0], poly[1], poly[2]]),
                4 => {
                    faces.push([poly[0], poly[1], poly[2]]);
                    faces.push([poly[0], poly[2], poly[3]]);
                }
                n => {
                    return Err(Error::parse(
                        path,
                        0,
                        format!("face {i} has {n} vertices (only triangles and quads)"),
                    ))
                }
            }
        }
        TriangleMesh::new(self.vertices, faces)
    }

    pub fn into_cloud(self) -> PointCloud {
        PointCloud {
            points: self.vertices,
            normals: self.normals,
            face_ids: self.face_ids,
        }
    }
}

pub fn read_ply(path: &Path) -> Result<PlyData> {
    let bytes = fs::read(path)?;
    parse_ply(&bytes, path)
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<(Format, Vec<Element>, usize, usize)> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(path, line_no + 1, "unterminated PLY header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| Error::parse(path, line_no + 1, "non-UTF8 header"))?
            .trim();
        pos += end + 1;
        line_no += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line != "ply" {
                return Err(Error::parse(path, 1, "missing 'ply' magic line"));
            }
            continue;
        }
        match toks.first().copied() {
            Some("format") => {
                format = Some(match toks.get(1).copied() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLe,
                    other => {
                        return Err(Error::parse(path, line_no, format!("unsupported PLY format {other:?}")))
                    }
                })
            }
            Some("element") => {
                let (Some(name), Some(count)) = (toks.get(1), toks.get(2)) else {
                    return Err(Error::parse(path, line_no, "malformed element line"));
                };
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, "bad element count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, line_no, "property before element"))?;
                let bad = || Error::parse(path, line_no, "malformed property line");
                if toks.get(1) == Some(&"list") {
                    let count = toks.get(2).and_then(|t| Scalar::parse(t)).ok_or_else(bad)?;
                    let item = toks.get(3).and_then(|t| Scalar::parse(t)).ok_or_else(bad)?;
                    let name = toks.get(4).ok_or_else(bad)?.to_string();
                    el.props.push(Property::List { name, count, item });
                } else {
                    let ty = toks.get(1).and_then(|t| Scalar::parse(t)).ok_or_else(bad)?;
                    let name = toks.get(2).ok_or_else(bad)?.to_string();
                    el.props.push(Property::Scalar { name, ty });
                }
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => {
                return Err(Error::parse(path, line_no, format!("unknown header keyword {other:?}")))
            }
        }
    }
    let format = format.ok_or_else(|| Error::parse(path, line_no, "missing format line"))?;
    Ok((format, elements, pos, line_no))
}

/// Sequential reader over the body that tracks a line number (ASCII) or byte
/// offset (binary) for diagnostics.
struct Body<'a> {
    format: Format,
    bytes: &'a [u8],
    pos: usize,
    tokens: std::vec::IntoIter<&'a str>,
    line: usize,
    path: &'a Path,
}

impl<'a> Body<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        match self.format {
            Format::Ascii => Error::parse(self.path, self.line, msg),
            Format::BinaryLe => Error::parse(self.path, 0, format!("byte offset {}: {}", self.pos, msg.into())),
        }
    }

    fn next_line(&mut self) -> Result<()> {
        loop {
            if self.pos >= self.bytes.len() {
                return Err(self.err("unexpected end of file"));
            }
            let end = self.bytes[self.pos..]
                .iter()
                .position(|&b| b == b'\n')
                .map(|e| self.pos + e)
                .unwrap_or(self.bytes.len());
            let text = std::str::from_utf8(&self.bytes[self.pos..end]).map_err(|_| self.err("non-UTF8 data"))?;
            self.pos = end + 1;
            self.line += 1;
            let toks: Vec<&'a str> = text.split_whitespace().collect();
            if !toks.is_empty() {
                self.tokens = toks.into_iter();
                return Ok(());
            }
        }
    }

    fn value(&mut self, ty: Scalar) -> Result<f64> {
        match self.format {
            Format::Ascii => {
                let tok = self.tokens.next().ok_or_else(|| self.err("record has too few values"))?;
                tok.parse::<f64>().map_err(|_| self.err(format!("bad number {tok:?}")))
            }
            Format::BinaryLe => {
                let n = ty.size();
                if self.pos + n > self.bytes.len() {
                    return Err(self.err("unexpected end of file"));
                }
                let v = ty.read_le(&self.bytes[self.pos..self.pos + n]);
                self.pos += n;
                Ok(v)
            }
        }
    }
}

fn parse_ply(bytes: &[u8], path: &Path) -> Result<PlyData> {
    let (format, elements, body_start, header_lines) = parse_header(bytes, path)?;
    let mut body = Body {
        format,
        bytes,
        pos: body_start,
        tokens: Vec::new().into_iter(),
        line: header_lines,
        path,
    };
    let mut out = PlyData::default();
    for el in &elements {
        let prop_index = |name: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar { name: n, .. } if n == name))
        };
        let is_vertex = el.name == "vertex";
        let (ix, iy, iz) = (prop_index("x"), prop_index("y"), prop_index("z"));
        let normal_idx = match (prop_index("nx"), prop_index("ny"), prop_index("nz")) {
            (Some(a), Some(b), Some(c)) => Some([a, b, c]),
            _ => None,
        };
        let face_idx = prop_index("face_index");
        if is_vertex && (ix.is_none() || iy.is_none() || iz.is_none()) {
            return Err(Error::parse(path, 0, "vertex element lacks x/y/z"));
        }
        let mut normals = Vec::new();
        let mut face_ids = Vec::new();
        let mut scalars = vec![0.0; el.props.len()];
        for _ in 0..el.count {
            if format == Format::Ascii {
                body.next_line()?;
            }
            let mut list: Vec<u32> = Vec::new();
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => scalars[pi] = body.value(*ty)?,
                    Property::List { name, count, item } => {
                        let n = body.value(*count)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(body.err("bad list length"));
                        }
                        let keep = el.name == "face" && (name == "vertex_indices" || name == "vertex_index");
                        for _ in 0..n as usize {
                            let v = body.value(*item)?;
                            if keep {
                                if v < 0.0 || v.fract() != 0.0 {
                                    return Err(body.err(format!("bad vertex index {v}")));
                                }
                                list.push(v as u32);
                            }
                        }
                    }
                }
            }
            if is_vertex {
                out.vertices.push(Point::new(
                    scalars[ix.unwrap()],
                    scalars[iy.unwrap()],
                    scalars[iz.unwrap()],
                ));
                if let Some([a, b, c]) = normal_idx {
                    normals.push(Vector::new(scalars[a], scalars[b], scalars[c]));
                }
                if let Some(fi) = face_idx {
                    face_ids.push(scalars[fi] as u32);
                }
            } else if el.name == "face" {
                out.polygons.push(list);
            }
        }
        if is_vertex {
            if normal_idx.is_some() {
                out.normals = Some(normals);
            }
            if face_idx.is_some() {
                out.face_ids = Some(face_ids);
            }
        }
    }
    Ok(out)
}

/// Writes an ASCII PLY point cloud: positions, normals when present, and the
/// source face index when known. Values use shortest round-trip formatting.
pub fn write_cloud_ply(pc: &PointCloud, path: &Path) -> Result<()> {
    fs::write(path, cloud_ply_string(pc))?;
    Ok(())
}

pub(crate) fn cloud_ply_string(pc: &PointCloud) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", pc.len());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if pc.normals.is_some() {
        out.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    if pc.face_ids.is_some() {
        out.push_str("property int face_index\n");
    }
    out.push_str("end_header\n");
    for (i, p) in pc.points.iter().enumerate() {
        let _ = write!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
        if let Some(n) = &pc.normals {
            let _ = write!(out, " {:?} {:?} {:?}", n[i].x, n[i].y, n[i].z);
        }
        if let Some(f) = &pc.face_ids {
            let _ = write!(out, " {}", f[i]);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_mesh_with_quad() {
        let text = "ply\nformat ascii 1.0\ncomment x\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let data = parse_ply(text.as_bytes(), Path::new("q.ply")).unwrap();
        let mesh = data.into_mesh(Path::new("q.ply")).unwrap();
        assert_eq!(mesh.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn binary_little_endian_mesh() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty double z\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n".to_vec();
        for (x, y, z) in [(0f32, 0f32, 0f64), (1.0, 0.0, 0.0), (0.0, 1.0, 0.5)] {
            bytes.extend(x.to_le_bytes());
            bytes.extend(y.to_le_bytes());
            bytes.extend(z.to_le_bytes());
        }
        bytes.push(3);
        for i in [0u32, 1, 2] {
            bytes.extend(i.to_le_bytes());
        }
        let mesh = parse_ply(&bytes, Path::new("b.ply"))
            .unwrap()
            .into_mesh(Path::new("b.ply"))
            .unwrap();
        assert_eq!(mesh.vertices[2], Point::new(0.0, 1.0, 0.5));
        assert_eq!(mesh.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn truncated_ascii_names_line() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0\n";
        match parse_ply(text.as_bytes(), Path::new("t.ply")).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 9),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn cloud_round_trip_is_exact() {
        let pc = PointCloud {
            points: vec![Point::new(0.1, 1.0 / 3.0, -2e-9), Point::new(1.0, 2.0, 3.0)],
            normals: Some(vec![Vector::new(0.0, 0.0, 1.0), Vector::new(0.6, 0.8, 0.0)]),
            face_ids: Some(vec![7, 0]),
        };
        let s = cloud_ply_string(&pc);
        let back = parse_ply(s.as_bytes(), Path::new("c.ply")).unwrap().into_cloud();
        assert_eq!(back, pc);
    }
}
