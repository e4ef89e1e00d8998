use rayon::prelude::*;

use super::raycast::RAY_JITTER;
use super::{winding_number, Aabb, ColumnIndex, Point, TriangleBvh, TriangleMesh};
use crate::error::{Error, Result};

/// Dense scalar field sampled at cell centres `origin + (index + 0.5) * voxel_edge`,
/// stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    origin: Point,
    voxel_edge: f64,
    dims: [usize; 3],
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(origin: Point, voxel_edge: f64, dims: [usize; 3], values: Vec<f64>) -> Result<Self> {
        if !(voxel_edge > 0.0) {
            return Err(Error::InvalidArgument(format!("voxel edge must be positive, got {voxel_edge}")));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("grid dimensions must be positive, got {dims:?}")));
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::InvalidArgument(format!(
                "{} values for a {dims:?} grid",
                values.len()
            )));
        }
        Ok(ScalarGrid {
            origin,
            voxel_edge,
            dims,
            values,
        })
    }

    pub fn filled(origin: Point, voxel_edge: f64, dims: [usize; 3], value: f64) -> Result<Self> {
        Self::new(origin, voxel_edge, dims, vec![value; dims[0] * dims[1] * dims[2]])
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn voxel_edge(&self) -> f64 {
        self.voxel_edge
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> Point {
        let h = self.voxel_edge;
        Point::new(
            self.origin.x + (i as f64 + 0.5) * h,
            self.origin.y + (j as f64 + 0.5) * h,
            self.origin.z + (k as f64 + 0.5) * h,
        )
    }

    /// Value at the sample nearest to `p`, or `None` outside the grid.
    pub fn sample_nearest(&self, p: &Point) -> Option<f64> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = (p[a] - self.origin[a]) / self.voxel_edge;
            if f < 0.0 || f >= self.dims[a] as f64 {
                return None;
            }
            idx[a] = f as usize;
        }
        Some(self.get(idx[0], idx[1], idx[2]))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Signed Euclidean distance to `mesh`, negative inside, sampled over its
/// bounding box grown by `padding`.
///
/// Distances come from exact closest-point queries. Inside/outside comes from
/// crossing parity along z columns, with the generalized winding number as the
/// fallback for any column whose crossing count is odd.
pub fn compute_sdf_grid(mesh: &TriangleMesh, voxel_edge: f64, padding: f64) -> Result<ScalarGrid> {
    if !(voxel_edge > 0.0) {
        return Err(Error::InvalidArgument(format!("voxel edge must be positive, got {voxel_edge}")));
    }
    if padding < 0.0 {
        return Err(Error::InvalidArgument(format!("padding must be non-negative, got {padding}")));
    }
    mesh.require_watertight()?;
    let bb: Aabb = mesh.bbox().expanded(padding);
    let ext = bb.extent();
    let dims = [
        ((ext.x / voxel_edge).ceil() as usize).max(1),
        ((ext.y / voxel_edge).ceil() as usize).max(1),
        ((ext.z / voxel_edge).ceil() as usize).max(1),
    ];
    let origin = bb.min;
    let h = voxel_edge;
    let bvh = TriangleBvh::new(mesh);
    let columns = ColumnIndex::new(mesh);
    let (nx, ny, nz) = (dims[0], dims[1], dims[2]);

    // one column of values per (i, j), filled bottom to top
    let cols: Vec<Vec<f64>> = (0..nx * ny)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c % nx, c / nx);
            let x = origin.x + (i as f64 + 0.5) * h;
            let y = origin.y + (j as f64 + 0.5) * h;
            let z0 = origin.z + 0.5 * h;
            let mut inside = vec![false; nz];
            let mut scratch = Vec::new();
            let ok = columns.classify_column(
                x + RAY_JITTER[0] * h,
                y + RAY_JITTER[1] * h,
                z0,
                h,
                &mut inside,
                &mut scratch,
            );
            let mut out = Vec::with_capacity(nz);
            let mut prev: Option<f64> = None;
            for (k, flag) in inside.iter_mut().enumerate() {
                let p = Point::new(x, y, z0 + k as f64 * h);
                // 1-Lipschitz bound from the previous sample prunes the search
                let hit = match prev {
                    Some(d) => {
                        let bound = d + h * 1.000001;
                        bvh.closest_point_within(&p, bound * bound)
                            .unwrap_or_else(|| bvh.closest_point(&p))
                    }
                    None => bvh.closest_point(&p),
                };
                let d = hit.distance();
                prev = Some(d);
                if !ok {
                    *flag = winding_number(mesh, &p) > 0.5;
                }
                out.push(if *flag { -d } else { d });
            }
            out
        })
        .collect();

    let mut values = vec![0.0; nx * ny * nz];
    for (c, col) in cols.into_iter().enumerate() {
        let (i, j) = (c % nx, c / nx);
        for (k, v) in col.into_iter().enumerate() {
            values[i + nx * (j + ny * k)] = v;
        }
    }
    ScalarGrid::new(origin, h, dims, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::bvh::closest_on_triangle;
    use crate::shapes;

    #[test]
    fn sphere_center_and_outside() {
        let s = shapes::icosphere(1.0, 3);
        let h = 0.05;
        let g = compute_sdf_grid(&s, h, 1.2).unwrap();
        let center = g.sample_nearest(&Point::origin()).unwrap();
        assert!((center + 1.0).abs() < h, "center {center}");
        let out = g.sample_nearest(&Point::new(2.0, 0.0, 0.0)).unwrap();
        assert!((out - 1.0).abs() < h, "outside {out}");
    }

    #[test]
    fn cube_face_offset_matches_brute_force() {
        let cube = shapes::cube(Point::origin(), Point::new(1.0, 1.0, 1.0));
        let h = 0.05;
        let g = compute_sdf_grid(&cube, h, 0.5).unwrap();
        let p = Point::new(0.5, 0.5, 1.25);
        let v = g.sample_nearest(&p).unwrap();
        let brute = (0..cube.triangle_count())
            .map(|t| {
                let [a, b, c] = cube.triangle(t);
                (closest_on_triangle(&p, &a, &b, &c).0 - p).norm()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((brute - 0.25).abs() < 1e-12);
        assert!((v - 0.25).abs() < h, "value {v}");
    }

    #[test]
    fn sign_flips_once_along_ray_through_convex_shape() {
        let s = shapes::icosphere(1.0, 2);
        let g = compute_sdf_grid(&s, 0.1, 0.5).unwrap();
        let [nx, ny, nz] = g.dims();
        let (j, k) = (ny / 2, nz / 2);
        let signs: Vec<bool> = (nx / 2..nx).map(|i| g.get(i, j, k) < 0.0).collect();
        let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(flips, 1);
        assert!(signs[0] && !signs[signs.len() - 1]);
    }

    #[test]
    fn open_mesh_is_rejected() {
        let patch = shapes::plane_patch(1.0, 1.0, 2, 2);
        match compute_sdf_grid(&patch, 0.1, 0.1) {
            Err(Error::NotWatertight { open_edges }) => assert_eq!(open_edges, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_constructor_validates() {
        assert!(ScalarGrid::new(Point::origin(), 0.0, [1, 1, 1], vec![0.0]).is_err());
        assert!(ScalarGrid::new(Point::origin(), 1.0, [2, 1, 1], vec![0.0]).is_err());
    }
}
