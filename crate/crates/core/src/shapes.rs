//! Procedural test shapes: spheres, boxes, solids of revolution, tori and
//! flat patches. Every closed shape is watertight with outward winding.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::{Point, TriangleMesh, Vector};

/// Subdivided icosahedron projected onto a sphere centred at the origin.
/// `subdivisions = 2` gives 320 faces / 162 vertices, `3` gives 1280 / 642.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector::new(v[0], v[1], v[2]).normalize())
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
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vector>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = mid(f[0], f[1], &mut verts);
            let bc = mid(f[1], f[2], &mut verts);
            let ca = mid(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let points = verts.into_iter().map(|v| Point::from(v * radius)).collect();
    TriangleMesh::new(points, faces).expect("icosphere is valid")
}

/// Axis-aligned ellipsoid with the given semi-axes, centred at `center`.
pub fn ellipsoid(center: Point, semi_axes: Vector, subdivisions: u32) -> TriangleMesh {
    icosphere(1.0, subdivisions)
        .map_points(|p| center + p.coords.component_mul(&semi_axes), false)
        .expect("ellipsoid is valid")
}

pub fn cube(min: Point, max: Point) -> TriangleMesh {
    let mut v = Vec::with_capacity(8);
    for i in 0..8 {
        v.push(Point::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        ));
    }
    let tris = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriangleMesh::new(v, tris).expect("cube is valid")
}

/// Closed solid of revolution about the z axis. `profile` lists (radius, z)
/// pairs from bottom to top; ends with non-zero radius are capped with a disc.
pub fn lathe(profile: &[(f64, f64)], segments: usize) -> TriangleMesh {
    assert!(profile.len() >= 2 && segments >= 3);
    let mut vertices: Vec<Point> = Vec::new();
    let mut rings: Vec<Vec<u32>> = Vec::new();
    for &(r, z) in profile {
        if r <= 0.0 {
            vertices.push(Point::new(0.0, 0.0, z));
            rings.push(vec![vertices.len() as u32 - 1]);
        } else {
            let ring = (0..segments)
                .map(|s| {
                    let phi = 2.0 * PI * s as f64 / segments as f64;
                    vertices.push(Point::new(r * phi.cos(), r * phi.sin(), z));
                    vertices.len() as u32 - 1
                })
                .collect();
            rings.push(ring);
        }
    }
    let mut tris = Vec::new();
    let at = |ring: &Vec<u32>, s: usize| ring[if ring.len() == 1 { 0 } else { s % segments }];
    for w in rings.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        for s in 0..segments {
            let (a, b) = (at(lo, s), at(lo, s + 1));
            let (c, d) = (at(hi, s), at(hi, s + 1));
            if lo.len() > 1 {
                tris.push([a, b, d]);
            }
            if hi.len() > 1 {
                tris.push([a, d, c]);
            } else if lo.len() == 1 {
                unreachable!("two consecutive poles");
            }
        }
    }
    let mut cap = |ring: &Vec<u32>, z: f64, top: bool| {
        if ring.len() == 1 {
            return;
        }
        vertices.push(Point::new(0.0, 0.0, z));
        let c = vertices.len() as u32 - 1;
        for s in 0..segments {
            let (a, b) = (ring[s], ring[(s + 1) % segments]);
            tris.push(if top { [c, a, b] } else { [c, b, a] });
        }
    };
    cap(&rings[0], profile[0].1, false);
    cap(&rings[rings.len() - 1], profile[profile.len() - 1].1, true);
    let mesh = TriangleMesh::new(vertices, tris).expect("lathe is valid");
    if mesh.volume() < 0.0 {
        mesh.map_points(|p| *p, true).expect("lathe is valid")
    } else {
        mesh
    }
}

/// Closed cylinder of the given radius spanning z in [0, height].
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    lathe(&[(radius, 0.0), (radius, height)], segments)
}

/// Cone with its apex at z = 0 and a capped base of `radius` at z = `height`.
pub fn cone_apex_down(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    lathe(&[(0.0, 0.0), (radius, height)], segments)
}

/// Capsule along z: a cylinder of `length` between two hemispherical caps,
/// centred at the origin.
pub fn capsule(radius: f64, length: f64, segments: usize, cap_rings: usize) -> TriangleMesh {
    let half = length / 2.0;
    let mut profile = vec![(0.0, -half - radius)];
    for i in 1..cap_rings {
        let theta = -PI / 2.0 + PI / 2.0 * i as f64 / cap_rings as f64;
        profile.push((radius * theta.cos(), -half + radius * theta.sin()));
    }
    profile.push((radius, -half));
    profile.push((radius, half));
    for i in 1..cap_rings {
        let theta = PI / 2.0 * i as f64 / cap_rings as f64;
        profile.push((radius * theta.cos(), half + radius * theta.sin()));
    }
    profile.push((0.0, half + radius));
    lathe(&profile, segments)
}

/// A vase-like solid of revolution of total `height` with a bulging belly.
pub fn vase(height: f64, max_radius: f64, segments: usize, rows: usize) -> TriangleMesh {
    let mut profile = Vec::with_capacity(rows + 1);
    for i in 0..=rows {
        let s = i as f64 / rows as f64;
        let r = max_radius * (0.55 + 0.45 * (PI * (0.15 + 0.85 * s)).sin() - 0.12 * s);
        profile.push((r, height * s));
    }
    lathe(&profile, segments)
}

/// Torus about the z axis with major radius `major` and tube radius `minor`.
pub fn torus(major: f64, minor: f64, major_segments: usize, minor_segments: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(major_segments * minor_segments);
    for i in 0..major_segments {
        let u = 2.0 * PI * i as f64 / major_segments as f64;
        for j in 0..minor_segments {
            let v = 2.0 * PI * j as f64 / minor_segments as f64;
            let r = major + minor * v.cos();
            vertices.push(Point::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % major_segments) * minor_segments + (j % minor_segments)) as u32;
    let mut tris = Vec::new();
    for i in 0..major_segments {
        for j in 0..minor_segments {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, tris).expect("torus is valid")
}

/// Open rectangular patch in the z = 0 plane, `[0, width] x [0, depth]`.
pub fn plane_patch(width: f64, depth: f64, nx: usize, ny: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point::new(width * i as f64 / nx as f64, depth * j as f64 / ny as f64, 0.0));
        }
    }
    let idx = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
    let mut tris = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            tris.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            tris.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, tris).expect("patch is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_shapes_are_watertight_and_outward() {
        let shapes = [
            icosphere(1.0, 2),
            cube(Point::origin(), Point::new(1.0, 2.0, 3.0)),
            cylinder(1.0, 2.0, 24),
            cone_apex_down(1.0, 2.0, 24),
            capsule(1.0, 2.0, 24, 6),
            vase(4.0, 1.0, 32, 16),
            torus(2.0, 0.5, 32, 16),
        ];
        for s in &shapes {
            assert!(s.is_watertight());
            assert!(s.volume() > 0.0);
        }
    }

    #[test]
    fn icosphere_counts() {
        let s = icosphere(1.0, 2);
        assert_eq!((s.vertex_count(), s.triangle_count()), (162, 320));
    }

    #[test]
    fn torus_volume() {
        let t = torus(2.0, 0.5, 96, 48);
        let exact = 2.0 * PI * PI * 2.0 * 0.25;
        assert!((t.volume() - exact).abs() / exact < 0.01);
    }
}
