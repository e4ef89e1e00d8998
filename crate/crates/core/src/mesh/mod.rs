//! Indexed triangle meshes and the geometric machinery shared by every stage:
//! file IO, closest-point queries, column ray casting, signed distance grids,
//! marching cubes and planar slicing.

mod bvh;
pub mod io;
mod marching;
pub(crate) mod raycast;
mod sdf;
mod slice;

use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};

pub use bvh::{ClosestPoint, TriangleBvh};
pub use io::{
    load_mesh, load_mesh_with_report, load_obj_objects, save_mesh, save_obj, save_obj_objects, save_ply, LoadReport,
};
pub use marching::extract_isosurface;
pub use raycast::{winding_number, ColumnIndex};
pub use sdf::{compute_sdf_grid, ScalarGrid};
pub use slice::{section_area, slice_polylines, Polyline};

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// Triangles with an area at or below this (squared model units) are dropped.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Self {
        let mut bb = Aabb::empty();
        for p in points {
            bb.grow(p);
        }
        bb
    }

    pub fn grow(&mut self, p: &Point) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        out.grow(&other.min);
        out.grow(&other.max);
        out
    }

    pub fn extent(&self) -> Vector {
        self.max - self.min
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn expanded(&self, pad: f64) -> Aabb {
        let d = Vector::repeat(pad);
        Aabb {
            min: self.min - d,
            max: self.max + d,
        }
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_sq(&self, p: &Point) -> f64 {
        let mut d = 0.0;
        for a in 0..3 {
            let v = if p[a] < self.min[a] {
                self.min[a] - p[a]
            } else if p[a] > self.max[a] {
                p[a] - self.max[a]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

/// Counts from a cleanup pass over raw mesh data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleanupStats {
    pub degenerate_dropped: usize,
    pub unreferenced_dropped: usize,
}

/// Result of an edge-manifold audit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeAudit {
    pub edges: usize,
    /// Edges used by exactly one triangle.
    pub boundary: usize,
    /// Edges used by more than two triangles.
    pub non_manifold: usize,
}

impl EdgeAudit {
    pub fn open_edges(&self) -> usize {
        self.boundary + self.non_manifold
    }

    pub fn is_watertight(&self) -> bool {
        self.open_edges() == 0
    }
}

/// Indexed triangle surface with per-vertex unit normals.
///
/// Construction always drops zero-area and index-repeating triangles, removes
/// unreferenced vertices and recomputes area-weighted vertex normals, so every
/// value of this type is non-empty and free of degenerate faces.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vector>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        Self::with_cleanup(vertices, triangles).map(|(m, _)| m)
    }

    pub fn with_cleanup(
        vertices: Vec<Point>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<(Self, CleanupStats)> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i as usize >= n) {
                return Err(Error::IndexOutOfRange {
                    triangle: t,
                    index,
                    vertex_count: n,
                });
            }
        }
        let mut stats = CleanupStats::default();
        let kept: Vec<[u32; 3]> = triangles
            .into_iter()
            .filter(|t| {
                let ok = t[0] != t[1]
                    && t[1] != t[2]
                    && t[0] != t[2]
                    && tri_area(&vertices, t) > DEGENERATE_AREA;
                if !ok {
                    stats.degenerate_dropped += 1;
                }
                ok
            })
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyMesh);
        }

        let mut remap = vec![u32::MAX; n];
        let mut compact = Vec::with_capacity(n);
        let mut tris = Vec::with_capacity(kept.len());
        for t in &kept {
            let mut out = [0u32; 3];
            for k in 0..3 {
                let v = t[k] as usize;
                if remap[v] == u32::MAX {
                    remap[v] = compact.len() as u32;
                    compact.push(vertices[v]);
                }
                out[k] = remap[v];
            }
            tris.push(out);
        }
        stats.unreferenced_dropped = n - compact.len();

        let normals = vertex_normals(&compact, &tris);
        Ok((
            TriangleMesh {
                vertices: compact,
                triangles: tris,
                normals,
            },
            stats,
        ))
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vector] {
        &self.normals
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized face normal (length = twice the area).
    pub fn face_normal(&self, t: usize) -> Vector {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(&(c - a))
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| 0.5 * self.face_normal(t).norm())
            .sum()
    }

    /// Enclosed volume by the divergence theorem; positive for outward orientation.
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let a = self.vertices[t[0] as usize].coords;
                let b = self.vertices[t[1] as usize].coords;
                let c = self.vertices[t[2] as usize].coords;
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn edge_audit(&self) -> EdgeAudit {
        let mut uses: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.triangles.len() * 2);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut audit = EdgeAudit {
            edges: uses.len(),
            ..Default::default()
        };
        for &n in uses.values() {
            match n {
                1 => audit.boundary += 1,
                2 => {}
                _ => audit.non_manifold += 1,
            }
        }
        audit
    }

    pub fn is_watertight(&self) -> bool {
        self.edge_audit().is_watertight()
    }

    /// Fails with [`Error::NotWatertight`] unless every edge has exactly two triangles.
    pub fn require_watertight(&self) -> Result<()> {
        let audit = self.edge_audit();
        if audit.is_watertight() {
            Ok(())
        } else {
            Err(Error::NotWatertight {
                open_edges: audit.open_edges(),
            })
        }
    }

    /// Applies a point map to every vertex. An orientation-reversing map also
    /// flips the triangle winding so normals stay outward.
    pub fn map_points(&self, f: impl Fn(&Point) -> Point, reverses_orientation: bool) -> Result<Self> {
        let vertices = self.vertices.iter().map(f).collect();
        let triangles = if reverses_orientation {
            self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect()
        } else {
            self.triangles.clone()
        };
        TriangleMesh::new(vertices, triangles)
    }

    /// Rigid-plus-uniform-scale transform `p -> translation + rotation * (scale * p)`.
    pub fn transformed(&self, rotation: &Matrix3<f64>, scale: f64, translation: &Vector) -> Result<Self> {
        let reverses = rotation.determinant() * scale < 0.0;
        self.map_points(|p| Point::from(translation + rotation * (p.coords * scale)), reverses)
    }

    pub fn translated(&self, offset: &Vector) -> Result<Self> {
        self.map_points(|p| p + offset, false)
    }

    /// Scales each axis independently about the origin.
    pub fn scaled(&self, factors: &Vector) -> Result<Self> {
        let reverses = factors.x * factors.y * factors.z < 0.0;
        self.map_points(|p| Point::from(p.coords.component_mul(factors)), reverses)
    }

    /// Concatenates meshes without welding.
    pub fn concat<'a>(meshes: impl IntoIterator<Item = &'a TriangleMesh>) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for m in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            triangles.extend(m.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        TriangleMesh::new(vertices, triangles)
    }

    /// Merges vertices closer than `tolerance` and re-runs cleanup.
    pub fn welded(&self, tolerance: f64) -> Result<(Self, usize)> {
        let (vertices, triangles, merged) = weld(&self.vertices, &self.triangles, tolerance);
        let (mesh, _) = TriangleMesh::with_cleanup(vertices, triangles)?;
        Ok((mesh, merged))
    }
}

fn tri_area(vertices: &[Point], t: &[u32; 3]) -> f64 {
    let a = vertices[t[0] as usize];
    let b = vertices[t[1] as usize];
    let c = vertices[t[2] as usize];
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn vertex_normals(vertices: &[Point], triangles: &[[u32; 3]]) -> Vec<Vector> {
    let mut acc = vec![Vector::zeros(); vertices.len()];
    for t in triangles {
        let a = vertices[t[0] as usize];
        let b = vertices[t[1] as usize];
        let c = vertices[t[2] as usize];
        let n = (b - a).cross(&(c - a));
        for &v in t {
            acc[v as usize] += n;
        }
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                // opposite faces cancelling exactly; any unit vector keeps the invariant
                Vector::z()
            }
        })
        .collect()
}

/// Welds vertices within `tolerance` using a hash grid; the lowest index in a
/// cluster becomes the representative. Returns the number of merged vertices.
pub(crate) fn weld(
    vertices: &[Point],
    triangles: &[[u32; 3]],
    tolerance: f64,
) -> (Vec<Point>, Vec<[u32; 3]>, usize) {
    let cell = if tolerance > 0.0 { tolerance } else { f64::MIN_POSITIVE };
    let key = |p: &Point| {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    };
    let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let mut remap = vec![0u32; vertices.len()];
    let mut out: Vec<Point> = Vec::with_capacity(vertices.len());
    let tol_sq = tolerance * tolerance;
    for (i, p) in vertices.iter().enumerate() {
        let k = key(p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &j in list {
                            if (out[j as usize] - p).norm_squared() <= tol_sq {
                                found = Some(j);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        remap[i] = match found {
            Some(j) => j,
            None => {
                let j = out.len() as u32;
                out.push(*p);
                buckets.entry(k).or_default().push(j);
                j
            }
        };
    }
    let merged = vertices.len() - out.len();
    let tris = triangles
        .iter()
        .map(|t| [remap[t[0] as usize], remap[t[1] as usize], remap[t[2] as usize]])
        .collect();
    (out, tris, merged)
}

/// Rotation whose columns are (tangent, normal x tangent, normal).
pub fn frame_rotation(normal: &Vector, tangent: &Vector) -> Matrix3<f64> {
    let n = normal.normalize();
    let t = (tangent - n * n.dot(tangent)).normalize();
    let b = n.cross(&t);
    Matrix3::from_columns(&[t, b, n])
}

/// A unit tangent orthogonal to `normal`, derived from a fixed reference axis.
pub fn reference_tangent(normal: &Vector) -> Vector {
    let reference = if normal.x.abs() < 0.9 { Vector::x() } else { Vector::y() };
    (reference - normal * normal.dot(&reference)).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn unit_cube_area_and_volume() {
        let cube = shapes::cube(Point::origin(), Point::new(1.0, 1.0, 1.0));
        assert_eq!(cube.vertex_count(), 8);
        assert_eq!(cube.triangle_count(), 12);
        assert!((cube.surface_area() - 6.0).abs() < 1e-12);
        assert!((cube.volume() - 1.0).abs() < 1e-12);
        assert!(cube.is_watertight());
    }

    #[test]
    fn single_triangle_area() {
        let m = TriangleMesh::new(
            vec![Point::origin(), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!((m.surface_area() - 0.5).abs() < 1e-15);
        let audit = m.edge_audit();
        assert_eq!(audit.boundary, 3);
    }

    #[test]
    fn icosphere_area_below_sphere() {
        let s = shapes::icosphere(1.0, 3);
        assert_eq!(s.triangle_count(), 1280);
        let area = s.surface_area();
        let exact = 4.0 * std::f64::consts::PI;
        assert!(area < exact);
        assert!((exact - area) / exact < 0.01, "area {area}");
    }

    #[test]
    fn degenerate_triangles_are_dropped() {
        let cube = shapes::cube(Point::origin(), Point::new(1.0, 1.0, 1.0));
        let mut tris = cube.triangles().to_vec();
        tris.push([0, 0, 1]);
        let (m, stats) = TriangleMesh::with_cleanup(cube.vertices().to_vec(), tris).unwrap();
        assert_eq!(stats.degenerate_dropped, 1);
        assert_eq!(m.triangle_count(), 12);
    }

    #[test]
    fn out_of_range_index_is_an_error() {
        let err = TriangleMesh::new(vec![Point::origin()], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { .. }));
    }

    #[test]
    fn normals_are_unit() {
        let s = shapes::icosphere(2.0, 2);
        for n in s.normals() {
            assert!((n.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn welding_merges_duplicates() {
        let pts = vec![Point::origin(), Point::new(1e-12, 0.0, 0.0), Point::new(1.0, 0.0, 0.0)];
        let (out, tris, merged) = weld(&pts, &[[0, 1, 2]], 1e-9);
        assert_eq!(merged, 1);
        assert_eq!(out.len(), 2);
        assert_eq!(tris[0][0], tris[0][1]);
    }

    #[test]
    fn frame_is_orthonormal() {
        let n = Vector::new(1.0, 2.0, 3.0).normalize();
        let t = reference_tangent(&n);
        let r = frame_rotation(&n, &t);
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!((r.column(2) - n).norm() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn area_invariant_under_rigid_motion(
                ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
                angle in 0.0f64..std::f64::consts::TAU,
                tx in -10.0f64..10.0, ty in -10.0f64..10.0, tz in -10.0f64..10.0,
            ) {
                let axis = Vector::new(ax, ay, az);
                prop_assume!(axis.norm() > 1e-3);
                let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
                let s = shapes::icosphere(1.3, 2);
                let moved = s.transformed(rot.matrix(), 1.0, &Vector::new(tx, ty, tz)).unwrap();
                let (a0, a1) = (s.surface_area(), moved.surface_area());
                prop_assert!(((a0 - a1) / a0).abs() < 1e-9);
            }
        }
    }
}
