use std::collections::HashMap;

use super::{Point, TriangleMesh, Vector};

/// Polyline cut from a mesh by a plane. Closed loops are oriented
/// counter-clockwise around the solid when viewed from the plane's normal side.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<Point>,
    pub closed: bool,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        let open: f64 = self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        if self.closed && self.points.len() > 1 {
            open + (self.points[0] - self.points[self.points.len() - 1]).norm()
        } else {
            open
        }
    }
}

// directed segments keyed by the mesh edges they start and end on
struct Section {
    points: HashMap<(u32, u32), Point>,
    next: HashMap<(u32, u32), (u32, u32)>,
    segments: Vec<((u32, u32), (u32, u32))>,
}

fn section(mesh: &TriangleMesh, normal: &Vector, offset: f64) -> Section {
    let n = normal.normalize();
    let verts = mesh.vertices();
    // vertices exactly on the plane count as above it
    let side: Vec<f64> = verts.iter().map(|v| n.dot(&v.coords) - offset).collect();
    let above = |v: u32| side[v as usize] >= 0.0;
    let mut points = HashMap::new();
    let mut next = HashMap::new();
    let mut segments = Vec::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let mut cut: Vec<(u32, u32)> = Vec::with_capacity(2);
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if above(a) != above(b) {
                let key = (a.min(b), a.max(b));
                points.entry(key).or_insert_with(|| {
                    let (sa, sb) = (side[key.0 as usize], side[key.1 as usize]);
                    let s = sa / (sa - sb);
                    let (pa, pb) = (verts[key.0 as usize], verts[key.1 as usize]);
                    pa + (pb - pa) * s
                });
                cut.push(key);
            }
        }
        if cut.len() != 2 {
            continue;
        }
        let (p, q) = (points[&cut[0]], points[&cut[1]]);
        let dir = n.cross(&mesh.face_normal(t));
        let (from, to) = if (q - p).dot(&dir) >= 0.0 { (cut[0], cut[1]) } else { (cut[1], cut[0]) };
        next.insert(from, to);
        segments.push((from, to));
    }
    Section { points, next, segments }
}

/// Area enclosed by the cross-section of a closed mesh with the plane
/// `normal . x = offset`.
pub fn section_area(mesh: &TriangleMesh, normal: &Vector, offset: f64) -> f64 {
    let n = normal.normalize();
    let s = section(mesh, &n, offset);
    let sum: f64 = s
        .segments
        .iter()
        .map(|(a, b)| s.points[a].coords.cross(&s.points[b].coords).dot(&n))
        .sum();
    0.5 * sum
}

/// Cross-section polylines of the mesh with the plane `normal . x = offset`,
/// in a deterministic order (by smallest starting mesh edge).
pub fn slice_polylines(mesh: &TriangleMesh, normal: &Vector, offset: f64) -> Vec<Polyline> {
    let s = section(mesh, normal, offset);
    let mut has_prev: HashMap<(u32, u32), bool> = HashMap::new();
    for to in s.next.values() {
        has_prev.insert(*to, true);
    }
    let mut starts: Vec<(u32, u32)> = s.next.keys().copied().collect();
    starts.sort_unstable();
    let mut used: HashMap<(u32, u32), bool> = HashMap::new();
    let mut out = Vec::new();
    let walk = |start: (u32, u32), used: &mut HashMap<(u32, u32), bool>| {
        let mut keys = vec![start];
        used.insert(start, true);
        let mut cur = start;
        let mut closed = false;
        while let Some(&nx) = s.next.get(&cur) {
            if nx == start {
                closed = true;
                break;
            }
            if used.contains_key(&nx) {
                break;
            }
            used.insert(nx, true);
            keys.push(nx);
            cur = nx;
        }
        let mut points: Vec<Point> = Vec::with_capacity(keys.len());
        for k in &keys {
            let p = s.points[k];
            if points.last().is_none_or(|q: &Point| (p - q).norm_squared() > 1e-24) {
                points.push(p);
            }
        }
        if closed && points.len() > 1 && (points[0] - points[points.len() - 1]).norm_squared() <= 1e-24 {
            points.pop();
        }
        Polyline { points, closed }
    };
    // open chains first start where nothing leads in
    for &st in &starts {
        if !has_prev.contains_key(&st) && !used.contains_key(&st) {
            out.push(walk(st, &mut used));
        }
    }
    for &st in &starts {
        if !used.contains_key(&st) {
            out.push(walk(st, &mut used));
        }
    }
    out.retain(|p| p.points.len() >= 2);
    out
}
