//! Procedural test geometry: spheres, boxes, tori, planes and the concentric
//! dual sphere used for thin-gap experiments.

use std::collections::HashMap;

use crate::geom::Point;
use crate::mesh::TriangleMesh;

/// Icosahedron subdivided `levels` times and projected to a sphere.
pub fn icosphere(radius: f64, levels: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point::new(x, y, z))
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Point>| -> u32 {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(nalgebra::center(&verts[a as usize], &verts[b as usize]));
                verts.len() as u32 - 1
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut verts {
        *v = Point::from(v.coords.normalize() * radius);
    }
    TriangleMesh::from_parts(verts, faces)
}

/// Flat `[0,1]^2` square at z = 0 split into `n x n` cells of two triangles.
pub fn unit_square(n: usize) -> TriangleMesh {
    grid_surface(n, n, |u, v| Point::new(u, v, 0.0))
}

/// Grid over `[0,1]^2` mapped through `f`, two triangles per cell.
pub fn grid_surface(nu: usize, nv: usize, f: impl Fn(f64, f64) -> Point) -> TriangleMesh {
    let nu = nu.max(1);
    let nv = nv.max(1);
    let mut verts = Vec::with_capacity((nu + 1) * (nv + 1));
    for j in 0..=nv {
        for i in 0..=nu {
            verts.push(f(i as f64 / nu as f64, j as f64 / nv as f64));
        }
    }
    let id = |i: usize, j: usize| (j * (nu + 1) + i) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::from_parts(verts, faces)
}

/// Axis-aligned box centered at the origin, each side split into an `n x n`
/// grid. Shared seams use the same vertices.
pub fn box_mesh(size: [f64; 3], n: usize) -> TriangleMesh {
    let n = n.max(1);
    let half = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
    let mut verts: Vec<Point> = Vec::new();
    let mut index: HashMap<(i64, i64, i64), u32> = HashMap::new();
    let mut faces = Vec::new();
    // Lattice coordinates in [0, n] per axis make seam vertices coincide exactly.
    let mut vid = |l: [usize; 3], verts: &mut Vec<Point>| -> u32 {
        let key = (l[0] as i64, l[1] as i64, l[2] as i64);
        *index.entry(key).or_insert_with(|| {
            verts.push(Point::new(
                -half[0] + size[0] * l[0] as f64 / n as f64,
                -half[1] + size[1] * l[1] as f64 / n as f64,
                -half[2] + size[2] * l[2] as f64 / n as f64,
            ));
            verts.len() as u32 - 1
        })
    };
    for axis in 0..3 {
        let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0usize, n] {
            for j in 0..n {
                for i in 0..n {
                    let corner = |di: usize, dj: usize| {
                        let mut l = [0usize; 3];
                        l[axis] = side;
                        l[ua] = i + di;
                        l[va] = j + dj;
                        l
                    };
                    let a = vid(corner(0, 0), &mut verts);
                    let b = vid(corner(1, 0), &mut verts);
                    let c = vid(corner(1, 1), &mut verts);
                    let d = vid(corner(0, 1), &mut verts);
                    // Outward orientation: flip on the low side.
                    if side == n {
                        faces.push([a, b, c]);
                        faces.push([a, c, d]);
                    } else {
                        faces.push([a, c, b]);
                        faces.push([a, d, c]);
                    }
                }
            }
        }
    }
    TriangleMesh::from_parts(verts, faces)
}

/// Torus around the z axis with major radius `major` and tube radius `minor`.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriangleMesh {
    let mut verts = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        let v = j as f64 / nv as f64 * std::f64::consts::TAU;
        for i in 0..nu {
            let u = i as f64 / nu as f64 * std::f64::consts::TAU;
            let r = major + minor * v.cos();
            verts.push(Point::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| ((j % nv) * nu + (i % nu)) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::from_parts(verts, faces)
}

/// Two concentric icospheres with the given diameters, as one mesh with two
/// connected components.
pub fn dual_spheres(inner_diameter: f64, outer_diameter: f64, levels: u32) -> TriangleMesh {
    let inner = icosphere(inner_diameter / 2.0, levels);
    let outer = icosphere(outer_diameter / 2.0, levels);
    merge(&[&inner, &outer])
}

/// Concatenates meshes, offsetting face indices.
pub fn merge(parts: &[&TriangleMesh]) -> TriangleMesh {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for m in parts {
        let off = verts.len() as u32;
        verts.extend_from_slice(&m.vertices);
        faces.extend(m.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
    }
    TriangleMesh::from_parts(verts, faces)
}

/// Cube of side `side` centered at the origin where every square side is a
/// fan of four triangles around its center vertex. Face-center vertices are
/// `8..14` in the order -x, +x, -y, +y, -z, +z.
pub fn cube_with_face_centers(side: f64) -> TriangleMesh {
    let h = side / 2.0;
    let mut verts: Vec<Point> = (0..8)
        .map(|i| {
            Point::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            )
        })
        .collect();
    let mut faces = Vec::new();
    for axis in 0..3 {
        for (s, sign) in [(0, -1.0), (1, 1.0)] {
            let mut c = Point::origin();
            c[axis] = sign * h;
            let ci = verts.len() as u32;
            verts.push(c);
            let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
            // Corners of this side in cyclic order.
            let bit = |a: usize| 1u32 << a;
            let base = if s == 1 { bit(axis) } else { 0 };
            let ring = [base, base | bit(ua), base | bit(ua) | bit(va), base | bit(va)];
            for k in 0..4 {
                let (a, b) = (ring[k], ring[(k + 1) % 4]);
                if s == 1 {
                    faces.push([ci, a, b]);
                } else {
                    faces.push([ci, b, a]);
                }
            }
        }
    }
    TriangleMesh::from_parts(verts, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_shapes_are_manifold_and_closed() {
        for mesh in [
            icosphere(1.0, 2),
            box_mesh([1.0, 0.5, 0.8], 3),
            torus(0.35, 0.12, 24, 12),
            cube_with_face_centers(1.0),
        ] {
            assert!(mesh.non_manifold_edges().is_empty());
            assert!(mesh.boundary_edges().is_empty());
        }
    }

    #[test]
    fn areas() {
        assert!((unit_square(4).surface_area() - 1.0).abs() < 1e-12);
        assert!((box_mesh([1.0, 1.0, 1.0], 2).surface_area() - 6.0).abs() < 1e-12);
        assert!((cube_with_face_centers(1.0).surface_area() - 6.0).abs() < 1e-12);
        let s = icosphere(0.5, 4).surface_area();
        assert!(s < std::f64::consts::PI && s > 0.99 * std::f64::consts::PI);
    }
}
