//! Marching cubes with a case table generated from first principles.
//!
//! For each of the 256 corner configurations the table is built by cutting
//! every cube face into directed segments, chaining them into closed loops and
//! fan-triangulating each loop. Ambiguous faces (two diagonal inside corners)
//! always separate the inside corners. The rule depends only on the four
//! values of the face, so neighbouring cubes agree and the result is closed.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::{Point, ScalarGrid, TriangleMesh, Vector};
use crate::error::{Error, Result};

// clamp for edge interpolation so distinct edges never produce coincident vertices
const T_MIN: f64 = 1e-3;

#[derive(Debug, Clone)]
struct Loop {
    edges: Vec<u8>,
    // fan apex within `edges`, or None to fan from the loop centroid
    apex: Option<usize>,
}

fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

fn corner_id(bits: [usize; 3]) -> usize {
    bits[0] | (bits[1] << 1) | (bits[2] << 2)
}

fn other_axes(a: usize) -> (usize, usize) {
    match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Edge index `axis * 4 + u + 2 v` where (u, v) are the bits of the other two
/// axes at the edge's start corner.
fn edge_id(axis: usize, start: [usize; 3]) -> u8 {
    let (b, c) = other_axes(axis);
    (axis * 4 + start[b] + 2 * start[c]) as u8
}

fn edge_corners(e: u8) -> (usize, usize, usize) {
    let e = e as usize;
    let axis = e / 4;
    let (b, c) = other_axes(axis);
    let mut bits = [0usize; 3];
    bits[b] = e & 1;
    bits[c] = (e >> 1) & 1;
    let start = corner_id(bits);
    bits[axis] = 1;
    (axis, start, corner_id(bits))
}

fn edge_midpoint(e: u8) -> Vector {
    let (_, a, b) = edge_corners(e);
    (corner_pos(a) + corner_pos(b)) * 0.5
}

fn corner_pos(c: usize) -> Vector {
    let o = corner_offset(c);
    Vector::new(o[0] as f64, o[1] as f64, o[2] as f64)
}

/// Faces (axis, side) containing edge `e`.
fn edge_faces(e: u8) -> [(usize, usize); 2] {
    let (axis, start, _) = edge_corners(e);
    let (b, c) = other_axes(axis);
    let o = corner_offset(start);
    [(b, o[b]), (c, o[c])]
}

fn build_case(case: usize) -> Vec<Loop> {
    let inside = |c: usize| case & (1 << c) != 0;
    let mut next: HashMap<u8, u8> = HashMap::new();
    for axis in 0..3 {
        let (b, c) = other_axes(axis);
        for side in 0..2 {
            let mut normal = Vector::zeros();
            normal[axis] = if side == 1 { 1.0 } else { -1.0 };
            let ring: Vec<usize> = [(0, 0), (1, 0), (1, 1), (0, 1)]
                .iter()
                .map(|&(u, v)| {
                    let mut bits = [0usize; 3];
                    bits[axis] = side;
                    bits[b] = u;
                    bits[c] = v;
                    corner_id(bits)
                })
                .collect();
            // face edge k joins ring[k] and ring[k + 1]
            let face_edge = |k: usize| {
                let (p, q) = (ring[k % 4], ring[(k + 1) % 4]);
                let (po, qo) = (corner_offset(p), corner_offset(q));
                let ax = (0..3).find(|&a| po[a] != qo[a]).unwrap();
                let start = if po[ax] == 0 { po } else { qo };
                edge_id(ax, start)
            };
            let crossings: Vec<usize> = (0..4).filter(|&k| inside(ring[k]) != inside(ring[(k + 1) % 4])).collect();
            let mut add = |e1: u8, e2: u8, c_in: Vector| {
                let (p, q) = (edge_midpoint(e1), edge_midpoint(e2));
                if (q - p).cross(&(c_in - p)).dot(&normal) > 0.0 {
                    next.insert(e1, e2);
                } else {
                    next.insert(e2, e1);
                }
            };
            match crossings.len() {
                0 => {}
                2 => {
                    let ins: Vec<Vector> = ring.iter().filter(|&&c| inside(c)).map(|&c| corner_pos(c)).collect();
                    let centroid = ins.iter().sum::<Vector>() / ins.len() as f64;
                    add(face_edge(crossings[0]), face_edge(crossings[1]), centroid);
                }
                4 => {
                    for k in 0..4 {
                        if inside(ring[k]) {
                            add(face_edge(k + 3), face_edge(k), corner_pos(ring[k]));
                        }
                    }
                }
                n => unreachable!("{n} crossings on a face"),
            }
        }
    }

    let mut loops = Vec::new();
    let mut starts: Vec<u8> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut used = [false; 12];
    for s in starts {
        if used[s as usize] {
            continue;
        }
        let mut edges = vec![s];
        used[s as usize] = true;
        let mut cur = next[&s];
        while cur != s {
            used[cur as usize] = true;
            edges.push(cur);
            cur = next[&cur];
        }
        let apex = choose_apex(&edges);
        loops.push(Loop { edges, apex });
    }
    loops
}

/// A fan apex whose diagonals never run between two crossings of one face.
fn choose_apex(edges: &[u8]) -> Option<usize> {
    let n = edges.len();
    if n == 3 {
        return Some(0);
    }
    (0..n).find(|&s| {
        let fs = edge_faces(edges[s]);
        (2..n - 1).all(|d| {
            let fj = edge_faces(edges[(s + d) % n]);
            !fs.iter().any(|f| fj.contains(f))
        })
    })
}

fn case_table() -> &'static [Vec<Loop>] {
    static TABLE: OnceLock<Vec<Vec<Loop>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..256).map(build_case).collect())
}

/// Triangulates the `level` set of `grid`, with the region `value < level`
/// treated as inside and normals pointing toward larger values.
///
/// Samples beyond the grid are treated as outside, so the output is always a
/// closed surface; where the inside touches the grid border the surface passes
/// half a cell outside the last sample.
pub fn extract_isosurface(grid: &ScalarGrid, level: f64) -> Result<TriangleMesh> {
    let (min, max) = grid.min_max();
    if !(min < level) {
        return Err(Error::EmptyIsosurface { level, min, max });
    }
    let dims = grid.dims();
    let [nx, ny, nz] = dims.map(|d| d as i64);
    let h = grid.voxel_edge();
    let origin = grid.origin();
    let values = grid.values();
    let sample = |i: i64, j: i64, k: i64| -> Option<f64> {
        if i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz {
            None
        } else {
            Some(values[(i + nx * (j + ny * k)) as usize])
        }
    };
    let is_inside = |i: i64, j: i64, k: i64| sample(i, j, k).is_some_and(|v| v < level);
    let position = |i: i64, j: i64, k: i64| {
        Point::new(
            origin.x + (i as f64 + 0.5) * h,
            origin.y + (j as f64 + 0.5) * h,
            origin.z + (k as f64 + 0.5) * h,
        )
    };
    let table = case_table();
    let mut vertices: Vec<Point> = Vec::new();
    let mut edge_vertex: HashMap<([i64; 3], u8), u32> = HashMap::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    // cubes span samples (i..i+1); virtual outside samples pad every side
    for k in -1..nz {
        for j in -1..ny {
            for i in -1..nx {
                let mut case = 0usize;
                for c in 0..8 {
                    let o = corner_offset(c);
                    if is_inside(i + o[0] as i64, j + o[1] as i64, k + o[2] as i64) {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let mut vertex_of = |e: u8, vertices: &mut Vec<Point>| -> u32 {
                    let (axis, a, _) = edge_corners(e);
                    let o = corner_offset(a);
                    let start = [i + o[0] as i64, j + o[1] as i64, k + o[2] as i64];
                    *edge_vertex.entry((start, axis as u8)).or_insert_with(|| {
                        let mut end = start;
                        end[axis] += 1;
                        let p0 = position(start[0], start[1], start[2]);
                        let p1 = position(end[0], end[1], end[2]);
                        let v0 = sample(start[0], start[1], start[2]);
                        let v1 = sample(end[0], end[1], end[2]);
                        let t = match (v0, v1) {
                            (Some(v0), Some(v1)) => (level - v0) / (v1 - v0),
                            _ => 0.5,
                        };
                        let t = if t.is_finite() { t.clamp(T_MIN, 1.0 - T_MIN) } else { 0.5 };
                        vertices.push(p0 + (p1 - p0) * t);
                        vertices.len() as u32 - 1
                    })
                };
                for lp in &table[case] {
                    let ids: Vec<u32> = lp.edges.iter().map(|&e| vertex_of(e, &mut vertices)).collect();
                    let n = ids.len();
                    // loops run counter-clockwise around the inside region, so reverse
                    match lp.apex {
                        Some(s) => {
                            for d in 1..n - 1 {
                                triangles.push([ids[s], ids[(s + d + 1) % n], ids[(s + d) % n]]);
                            }
                        }
                        None => {
                            let c = ids.iter().map(|&v| vertices[v as usize].coords).sum::<Vector>() / n as f64;
                            vertices.push(Point::from(c));
                            let cid = vertices.len() as u32 - 1;
                            for d in 0..n {
                                triangles.push([cid, ids[(d + 1) % n], ids[d]]);
                            }
                        }
                    }
                }
            }
        }
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::compute_sdf_grid;
    use crate::shapes;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn every_case_forms_closed_loops() {
        for (case, loops) in case_table().iter().enumerate() {
            let mut seen = [0u8; 12];
            for lp in loops {
                assert!(lp.edges.len() >= 3, "case {case}");
                for &e in &lp.edges {
                    seen[e as usize] += 1;
                }
            }
            for e in 0..12u8 {
                let (_, a, b) = edge_corners(e);
                let crossing = ((case >> a) & 1) != ((case >> b) & 1);
                assert_eq!(seen[e as usize], crossing as u8, "case {case} edge {e}");
            }
        }
    }

    #[test]
    fn sphere_area_at_zero_and_offset_levels() {
        let s = shapes::icosphere(1.0, 4);
        let g = compute_sdf_grid(&s, 0.05, 0.7).unwrap();
        let m = extract_isosurface(&g, 0.0).unwrap();
        assert!(m.is_watertight());
        let area = m.surface_area();
        assert!((area - 4.0 * PI).abs() / (4.0 * PI) < 0.03, "area {area}");
        assert!(m.volume() > 0.0);
        let off = extract_isosurface(&g, 0.5).unwrap();
        let expected = 4.0 * PI * 1.5 * 1.5;
        assert!(off.is_watertight());
        assert!((off.surface_area() - expected).abs() / expected < 0.03);
    }

    #[test]
    fn constant_grid_has_no_surface() {
        let g = ScalarGrid::filled(Point::origin(), 1.0, [4, 4, 4], 2.0).unwrap();
        assert!(matches!(extract_isosurface(&g, 1.0), Err(Error::EmptyIsosurface { .. })));
        assert!(extract_isosurface(&g, 3.0).is_ok());
    }

    #[test]
    fn single_inside_sample_is_an_octahedron() {
        let mut g = ScalarGrid::filled(Point::origin(), 1.0, [3, 3, 3], 1.0).unwrap();
        let idx = g.index(1, 1, 1);
        g.values_mut()[idx] = 0.0;
        let m = extract_isosurface(&g, 0.5).unwrap();
        assert_eq!(m.triangle_count(), 8);
        assert!((m.volume() - 1.0 / 6.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_occupancy_is_watertight(bits in proptest::collection::vec(any::<bool>(), 125)) {
            let values: Vec<f64> = bits.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect();
            prop_assume!(bits.iter().any(|&b| b));
            let g = ScalarGrid::new(Point::origin(), 0.5, [5, 5, 5], values).unwrap();
            let m = extract_isosurface(&g, 0.5).unwrap();
            prop_assert!(m.is_watertight());
            let inside = bits.iter().filter(|&&b| b).count() as f64;
            // each isolated inside sample carries at least an octahedron of volume h^3/6
            prop_assert!(m.volume() > 0.0 && m.volume() <= inside * 0.125 + 1e-9);
        }
    }
}
