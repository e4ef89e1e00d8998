use super::{Aabb, Point, TriangleMesh, Vector};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bbox: Aabb,
    // leaf: [start, start + count) into `order`; inner: children at `start`, `start + 1`
    start: u32,
    count: u32,
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub point: Point,
    pub triangle: usize,
    pub distance_sq: f64,
    /// Barycentric weights of `point` within `triangle`.
    pub barycentric: [f64; 3],
}

impl ClosestPoint {
    pub fn distance(&self) -> f64 {
        self.distance_sq.sqrt()
    }
}

/// Bounding-volume hierarchy over mesh triangles for exact closest-point
/// queries. Ties between equidistant triangles resolve to the lowest index.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    tris: Vec<[Point; 3]>,
}

impl TriangleBvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let tris: Vec<[Point; 3]> = (0..mesh.triangle_count()).map(|t| mesh.triangle(t)).collect();
        let boxes: Vec<Aabb> = tris.iter().map(|t| Aabb::from_points(t.iter())).collect();
        let centroids: Vec<Point> = boxes.iter().map(|b| b.center()).collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = vec![Node {
            bbox: Aabb::empty(),
            start: 0,
            count: 0,
        }];
        build(&mut nodes, 0, &mut order, 0, &boxes, &centroids);
        TriangleBvh { nodes, order, tris }
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn closest_point(&self, p: &Point) -> ClosestPoint {
        self.closest_point_within(p, f64::INFINITY)
            .expect("unbounded query always finds a triangle")
    }

    /// Closest point among triangles no farther than `sqrt(bound_sq)`.
    pub fn closest_point_within(&self, p: &Point, bound_sq: f64) -> Option<ClosestPoint> {
        let mut best: Option<ClosestPoint> = None;
        let mut best_d = bound_sq;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if node.bbox.distance_sq(p) > best_d {
                continue;
            }
            if node.count > 0 {
                let (s, c) = (node.start as usize, node.count as usize);
                for &t in &self.order[s..s + c] {
                    let tri = &self.tris[t as usize];
                    let (q, bary) = closest_on_triangle(p, &tri[0], &tri[1], &tri[2]);
                    let d = (q - p).norm_squared();
                    let better = match &best {
                        None => d <= best_d,
                        Some(b) => d < b.distance_sq || (d == b.distance_sq && (t as usize) < b.triangle),
                    };
                    if better {
                        best_d = d;
                        best = Some(ClosestPoint {
                            point: q,
                            triangle: t as usize,
                            distance_sq: d,
                            barycentric: bary,
                        });
                    }
                }
            } else {
                let (l, r) = (node.start, node.start + 1);
                let dl = self.nodes[l as usize].bbox.distance_sq(p);
                let dr = self.nodes[r as usize].bbox.distance_sq(p);
                // visit the nearer child first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }
}

fn build(
    nodes: &mut Vec<Node>,
    node: usize,
    order: &mut [u32],
    offset: usize,
    boxes: &[Aabb],
    centroids: &[Point],
) {
    let mut bbox = Aabb::empty();
    let mut cbox = Aabb::empty();
    for &t in order.iter() {
        bbox = bbox.union(&boxes[t as usize]);
        cbox.grow(&centroids[t as usize]);
    }
    nodes[node].bbox = bbox;
    if order.len() <= LEAF_SIZE {
        nodes[node].start = offset as u32;
        nodes[node].count = order.len() as u32;
        return;
    }
    let ext = cbox.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let left = nodes.len();
    nodes.push(Node {
        bbox: Aabb::empty(),
        start: 0,
        count: 0,
    });
    nodes.push(Node {
        bbox: Aabb::empty(),
        start: 0,
        count: 0,
    });
    nodes[node].start = left as u32;
    nodes[node].count = 0;
    let (lo, hi) = order.split_at_mut(mid);
    build(nodes, left, lo, offset, boxes, centroids);
    build(nodes, left + 1, hi, offset + mid, boxes, centroids);
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5) with its barycentric coordinates.
pub(crate) fn closest_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> (Point, [f64; 3]) {
    let ab: Vector = b - a;
    let ac: Vector = c - a;
    let ap: Vector = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

impl TriangleMesh {
    /// Closest surface point and the barycentrically interpolated unit normal
    /// there. Builds a BVH per call; use [`TriangleBvh`] for repeated queries.
    pub fn project(&self, p: &Point) -> (Point, Vector) {
        let bvh = TriangleBvh::new(self);
        let hit = bvh.closest_point(p);
        (hit.point, self.interpolated_normal(&hit))
    }

    pub fn interpolated_normal(&self, hit: &ClosestPoint) -> Vector {
        let t = self.triangles()[hit.triangle];
        let n = self.normals();
        let v = n[t[0] as usize] * hit.barycentric[0]
            + n[t[1] as usize] * hit.barycentric[1]
            + n[t[2] as usize] * hit.barycentric[2];
        let len = v.norm();
        if len > 1e-12 {
            v / len
        } else {
            self.face_normal(hit.triangle).normalize()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use proptest::prelude::*;

    fn brute_force(mesh: &TriangleMesh, p: &Point) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for t in 0..mesh.triangle_count() {
            let [a, b, c] = mesh.triangle(t);
            let (q, _) = closest_on_triangle(p, &a, &b, &c);
            let d = (q - p).norm_squared();
            if d < best.0 {
                best = (d, t);
            }
        }
        best
    }

    #[test]
    fn projects_radially_onto_sphere() {
        let s = shapes::icosphere(1.0, 4);
        let (q, n) = s.project(&Point::new(0.0, 0.0, 2.0));
        assert!((q - Point::new(0.0, 0.0, 1.0)).norm() < 1e-9);
        assert!((n - Vector::z()).norm() < 1e-9);
    }

    #[test]
    fn point_on_surface_is_unchanged() {
        let s = shapes::icosphere(1.0, 2);
        let [a, b, c] = s.triangle(17);
        let p = Point::from((a.coords + b.coords * 2.0 + c.coords) / 4.0);
        let (q, _) = s.project(&p);
        assert!((q - p).norm() < 1e-9);
    }

    #[test]
    fn equidistant_cube_edge_resolves_to_lowest_triangle() {
        let cube = shapes::cube(Point::origin(), Point::new(1.0, 1.0, 1.0));
        // outside the x = 1, z = 1 edge, equidistant from both faces
        let p = Point::new(1.5, 0.3, 1.5);
        let hit = TriangleBvh::new(&cube).closest_point(&p);
        let (d, t) = brute_force(&cube, &p);
        assert!((hit.distance_sq - d).abs() < 1e-12);
        assert_eq!(hit.triangle, t);
        assert!((hit.point - Point::new(1.0, 0.3, 1.0)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_brute_force(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
            let s = shapes::torus(1.5, 0.5, 24, 12);
            let p = Point::new(x, y, z);
            let hit = TriangleBvh::new(&s).closest_point(&p);
            let (d, _) = brute_force(&s, &p);
            prop_assert!((hit.distance_sq - d).abs() < 1e-12);
            // closer than every vertex
            for v in s.vertices() {
                prop_assert!(hit.distance_sq <= (v - p).norm_squared() + 1e-12);
            }
        }
    }
}
