use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{Point, TriangleMesh, Vector};

/// Symmetric 4x4 plane quadric, upper triangle stored row-wise.
#[derive(Debug, Clone, Copy, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    fn plane(n: &Vector, d: f64, weight: f64) -> Self {
        let (a, b, c) = (n.x, n.y, n.z);
        Quadric(
            [a * a, a * b, a * c, a * d, b * b, b * c, b * d, c * c, c * d, d * d].map(|v| v * weight),
        )
    }

    fn add(&mut self, o: &Quadric) {
        for k in 0..10 {
            self.0[k] += o.0[k];
        }
    }

    fn sum(&self, o: &Quadric) -> Quadric {
        let mut q = *self;
        q.add(o);
        q
    }

    fn eval(&self, p: &Point) -> f64 {
        let q = &self.0;
        let (x, y, z) = (p.x, p.y, p.z);
        q[0] * x * x + 2.0 * q[1] * x * y + 2.0 * q[2] * x * z + 2.0 * q[3] * x + q[4] * y * y + 2.0 * q[5] * y * z
            + 2.0 * q[6] * y
            + q[7] * z * z
            + 2.0 * q[8] * z
            + q[9]
    }

    /// Minimizer of the quadric when well conditioned.
    fn optimum(&self) -> Option<Point> {
        let q = &self.0;
        let a = Matrix3::new(q[0], q[1], q[2], q[1], q[4], q[5], q[2], q[5], q[7]);
        let scale = a.abs().max();
        if !(scale > 0.0) || a.determinant().abs() < 1e-9 * scale * scale * scale {
            return None;
        }
        a.try_inverse().map(|inv| Point::from(-(inv * Vector3::new(q[3], q[6], q[8]))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    cost: f64,
    a: u32,
    b: u32,
    stamp: (u32, u32),
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.cost.total_cmp(&o.cost).then((self.a, self.b).cmp(&(o.a, o.b)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct Decimator {
    pos: Vec<Point>,
    quadric: Vec<Quadric>,
    tris: Vec<[u32; 3]>,
    tri_alive: Vec<bool>,
    vert_tris: Vec<Vec<u32>>,
    version: Vec<u32>,
    alive_tris: usize,
    heap: BinaryHeap<Reverse<Candidate>>,
}

impl Decimator {
    fn new(mesh: &TriangleMesh) -> Self {
        let pos = mesh.vertices().to_vec();
        let tris = mesh.triangles().to_vec();
        let mut quadric = vec![Quadric::default(); pos.len()];
        let mut vert_tris = vec![Vec::new(); pos.len()];
        for (t, tri) in tris.iter().enumerate() {
            let [a, b, c] = tri.map(|i| pos[i as usize]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            if area > 0.0 {
                let n = cross.normalize();
                let q = Quadric::plane(&n, -n.dot(&a.coords), area);
                for &v in tri {
                    quadric[v as usize].add(&q);
                }
            }
            for &v in tri {
                vert_tris[v as usize].push(t as u32);
            }
        }
        let alive_tris = tris.len();
        Decimator {
            version: vec![0; pos.len()],
            tri_alive: vec![true; tris.len()],
            pos,
            quadric,
            tris,
            vert_tris,
            alive_tris,
            heap: BinaryHeap::new(),
        }
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.vert_tris[v as usize]
            .iter()
            .flat_map(|&t| self.tris[t as usize])
            .filter(|&u| u != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn placement(&self, a: u32, b: u32) -> (Point, f64) {
        let q = self.quadric[a as usize].sum(&self.quadric[b as usize]);
        let (pa, pb) = (self.pos[a as usize], self.pos[b as usize]);
        let mid = Point::from((pa.coords + pb.coords) * 0.5);
        let mut options = vec![mid, pa, pb];
        if let Some(p) = q.optimum() {
            // keep the optimum near the edge so collapses stay local
            let len = (pb - pa).norm();
            if (p - mid).norm() <= len {
                options.insert(0, p);
            }
        }
        options
            .into_iter()
            .map(|p| (p, q.eval(&p).max(0.0)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty")
    }

    fn push(&mut self, a: u32, b: u32) {
        let (a, b) = (a.min(b), a.max(b));
        let (_, cost) = self.placement(a, b);
        self.heap.push(Reverse(Candidate {
            cost,
            a,
            b,
            stamp: (self.version[a as usize], self.version[b as usize]),
        }));
    }

    /// Collapse is allowed when the edge has exactly two incident triangles,
    /// the endpoints share exactly two neighbours, and no surviving triangle
    /// flips or degenerates.
    fn can_collapse(&self, a: u32, b: u32, p: &Point) -> bool {
        let shared = self.vert_tris[a as usize]
            .iter()
            .filter(|&&t| self.tris[t as usize].contains(&b))
            .count();
        if shared != 2 {
            return false;
        }
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        let common = na.iter().filter(|v| nb.binary_search(v).is_ok()).count();
        if common != 2 {
            return false;
        }
        for &v in &[a, b] {
            for &t in &self.vert_tris[v as usize] {
                let tri = self.tris[t as usize];
                if tri.contains(&a) && tri.contains(&b) {
                    continue;
                }
                let old = tri.map(|i| self.pos[i as usize]);
                let new = tri.map(|i| if i == a || i == b { *p } else { self.pos[i as usize] });
                let n_old = (old[1] - old[0]).cross(&(old[2] - old[0]));
                let n_new = (new[1] - new[0]).cross(&(new[2] - new[0]));
                let (lo, ln) = (n_old.norm(), n_new.norm());
                if ln <= 1e-12 * lo.max(f64::MIN_POSITIVE) || n_old.dot(&n_new) <= 0.2 * lo * ln {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, a: u32, b: u32, p: Point) {
        self.pos[a as usize] = p;
        let qb = self.quadric[b as usize];
        self.quadric[a as usize].add(&qb);
        let b_tris = std::mem::take(&mut self.vert_tris[b as usize]);
        for t in b_tris {
            let tri = &mut self.tris[t as usize];
            if tri.contains(&a) {
                self.tri_alive[t as usize] = false;
                self.alive_tris -= 1;
                for &v in tri.iter() {
                    if v != b {
                        self.vert_tris[v as usize].retain(|&x| x != t);
                    }
                }
            } else {
                for v in tri.iter_mut() {
                    if *v == b {
                        *v = a;
                    }
                }
                self.vert_tris[a as usize].push(t);
            }
        }
        self.version[a as usize] += 1;
        self.version[b as usize] += 1;
        for n in self.neighbors(a) {
            self.push(a, n);
        }
    }

    fn run(&mut self, target: usize) {
        for t in 0..self.tris.len() {
            let tri = self.tris[t];
            for k in 0..3 {
                let (u, v) = (tri[k], tri[(k + 1) % 3]);
                if u < v {
                    self.push(u, v);
                }
            }
        }
        while self.alive_tris > target {
            let Some(Reverse(c)) = self.heap.pop() else { break };
            if c.stamp != (self.version[c.a as usize], self.version[c.b as usize])
                || self.vert_tris[c.a as usize].is_empty()
                || self.vert_tris[c.b as usize].is_empty()
            {
                continue;
            }
            let (p, _) = self.placement(c.a, c.b);
            if self.can_collapse(c.a, c.b, &p) {
                self.collapse(c.a, c.b, p);
            }
        }
    }

    fn finish(self) -> Result<TriangleMesh> {
        let tris: Vec<[u32; 3]> = self
            .tris
            .iter()
            .zip(&self.tri_alive)
            .filter(|(_, &alive)| alive)
            .map(|(t, _)| *t)
            .collect();
        TriangleMesh::new(self.pos, tris).map_err(|_| Error::Collapsed)
    }
}

/// Quadric-error edge-collapse decimation down to at most `target`
/// triangles (or until no collapse keeps the surface manifold and unflipped).
/// Meshes already within budget are returned unchanged.
pub fn decimate(mesh: &TriangleMesh, target: usize) -> Result<TriangleMesh> {
    if target < 4 {
        return Err(Error::InvalidArgument(format!("triangle budget must be at least 4, got {target}")));
    }
    if mesh.triangle_count() <= target {
        return Ok(mesh.clone());
    }
    let watertight = mesh.is_watertight();
    let mut d = Decimator::new(mesh);
    d.run(target);
    let out = d.finish()?;
    if out.triangle_count() < 4 || (watertight && !out.is_watertight()) {
        return Err(Error::Collapsed);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn sphere_decimates_to_budget() {
        let s = shapes::icosphere(1.0, 4);
        let out = decimate(&s, 500).unwrap();
        assert!(out.triangle_count() <= 500);
        assert!(out.triangle_count() > 400);
        assert!(out.is_watertight());
        assert!((out.volume() - s.volume()).abs() / s.volume() < 0.02);
        for p in out.vertices() {
            assert!((p.coords.norm() - 1.0).abs() < 0.03);
        }
    }

    #[test]
    fn within_budget_is_unchanged() {
        let c = shapes::cube(Point::new(0.0, 0.0, 0.0), Point::new(1.0, 2.0, 3.0));
        assert_eq!(decimate(&c, 12).unwrap(), c);
        assert!(matches!(decimate(&c, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn deterministic() {
        let t = shapes::torus(1.0, 0.3, 48, 24);
        assert_eq!(decimate(&t, 800).unwrap(), decimate(&t, 800).unwrap());
        let out = decimate(&t, 800).unwrap();
        assert!(out.is_watertight());
        let genus_euler = out.vertex_count() as i64 - out.edge_audit().edges as i64 + out.triangle_count() as i64;
        assert_eq!(genus_euler, 0);
    }
}
