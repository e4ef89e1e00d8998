use super::{Point, TriangleMesh};

/// Fractions of the sampling step used to nudge column rays off the lattice,
/// so rays do not pass exactly through shared mesh edges or vertices.
pub(crate) const RAY_JITTER: [f64; 2] = [1.234_567e-6, 2.718_281e-6];

/// Triangles binned by their xy footprint for vertical (z-parallel) ray casts.
#[derive(Debug, Clone)]
pub struct ColumnIndex {
    tris: Vec<[Point; 3]>,
    min: [f64; 2],
    cell: [f64; 2],
    bins: [usize; 2],
    cells: Vec<Vec<u32>>,
}

impl ColumnIndex {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let tris: Vec<[Point; 3]> = (0..mesh.triangle_count()).map(|t| mesh.triangle(t)).collect();
        let bb = mesh.bbox();
        let side = ((tris.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let ext = [
            (bb.max.x - bb.min.x).max(1e-12),
            (bb.max.y - bb.min.y).max(1e-12),
        ];
        let bins = [side, side];
        let cell = [ext[0] / side as f64, ext[1] / side as f64];
        let min = [bb.min.x, bb.min.y];
        let mut cells = vec![Vec::new(); side * side];
        for (t, tri) in tris.iter().enumerate() {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in tri {
                for a in 0..2 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            let clamp = |v: f64, a: usize| (((v - min[a]) / cell[a]).floor().max(0.0) as usize).min(bins[a] - 1);
            for j in clamp(lo[1], 1)..=clamp(hi[1], 1) {
                for i in clamp(lo[0], 0)..=clamp(hi[0], 0) {
                    cells[j * side + i].push(t as u32);
                }
            }
        }
        ColumnIndex {
            tris,
            min,
            cell,
            bins,
            cells,
        }
    }

    /// Sorted z coordinates where the vertical line through `(x, y)` crosses
    /// the mesh. `out` is cleared first.
    pub fn hits(&self, x: f64, y: f64, out: &mut Vec<f64>) {
        out.clear();
        let i = (x - self.min[0]) / self.cell[0];
        let j = (y - self.min[1]) / self.cell[1];
        if i < 0.0 || j < 0.0 || i >= self.bins[0] as f64 + 1e-9 || j >= self.bins[1] as f64 + 1e-9 {
            return;
        }
        let i = (i as usize).min(self.bins[0] - 1);
        let j = (j as usize).min(self.bins[1] - 1);
        for &t in &self.cells[j * self.bins[0] + i] {
            let [a, b, c] = &self.tris[t as usize];
            let w0 = edge(b, c, x, y);
            let w1 = edge(c, a, x, y);
            let w2 = edge(a, b, x, y);
            let sum = w0 + w1 + w2;
            if sum.abs() < 1e-300 {
                continue;
            }
            let inside = (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0) || (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0);
            if inside {
                out.push((w0 * a.z + w1 * b.z + w2 * c.z) / sum);
            }
        }
        out.sort_by(f64::total_cmp);
    }

    /// Inside/outside flags for `n` samples at `z0 + k * dz` along the column
    /// through `(x, y)`, by crossing parity. Returns `false` (and leaves `out`
    /// untouched) when the crossing count is odd.
    pub fn classify_column(
        &self,
        x: f64,
        y: f64,
        z0: f64,
        dz: f64,
        out: &mut [bool],
        scratch: &mut Vec<f64>,
    ) -> bool {
        self.hits(x, y, scratch);
        if scratch.len() % 2 == 1 {
            return false;
        }
        out.iter_mut().for_each(|o| *o = false);
        for pair in scratch.chunks_exact(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let k0 = ((lo - z0) / dz).ceil().max(0.0) as usize;
            let mut k = k0;
            while k < out.len() {
                let z = z0 + k as f64 * dz;
                if z >= hi {
                    break;
                }
                if z > lo {
                    out[k] = true;
                }
                k += 1;
            }
        }
        true
    }
}

#[inline]
fn edge(u: &Point, v: &Point, x: f64, y: f64) -> f64 {
    (v.x - u.x) * (y - u.y) - (v.y - u.y) * (x - u.x)
}

/// Generalized winding number of `p` with respect to the mesh: ~1 inside a
/// closed outward-oriented surface, ~0 outside.
pub fn winding_number(mesh: &TriangleMesh, p: &Point) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle(t);
        let (a, b, c) = (a - p, b - p, c - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn vertical_ray_through_sphere_hits_twice() {
        let s = shapes::icosphere(1.0, 3);
        let idx = ColumnIndex::new(&s);
        let mut hits = Vec::new();
        idx.hits(0.1 + 1e-7, 0.2 + 2e-7, &mut hits);
        assert_eq!(hits.len(), 2);
        assert!(hits[0] < 0.0 && hits[1] > 0.0);
        idx.hits(3.0, 0.0, &mut hits);
        assert!(hits.is_empty());
    }

    #[test]
    fn winding_number_inside_and_outside() {
        let t = shapes::torus(2.0, 0.5, 32, 16);
        assert!((winding_number(&t, &Point::new(2.0, 0.0, 0.0)) - 1.0).abs() < 1e-6);
        assert!(winding_number(&t, &Point::new(0.0, 0.0, 0.0)).abs() < 1e-6);
        assert!(winding_number(&t, &Point::new(5.0, 1.0, 0.3)).abs() < 1e-6);
    }

    #[test]
    fn parity_matches_winding_number_on_torus() {
        let t = shapes::torus(2.0, 0.6, 40, 20);
        let idx = ColumnIndex::new(&t);
        let mut scratch = Vec::new();
        let mut flags = vec![false; 40];
        let (z0, dz) = (-1.0, 0.05);
        for &(x, y) in &[(2.0, 0.1), (1.55, 0.7), (0.3, 0.2), (-2.3, -0.4)] {
            assert!(idx.classify_column(x, y, z0, dz, &mut flags, &mut scratch));
            for (k, &inside) in flags.iter().enumerate() {
                let p = Point::new(x, y, z0 + k as f64 * dz);
                assert_eq!(inside, winding_number(&t, &p) > 0.5, "at {p:?}");
            }
        }
    }
}
