use super::{Axis, SeedPlacement};
use crate::error::{Error, Result};
use crate::mesh::{reference_tangent, slice_polylines, Point, Polyline, TriangleBvh, TriangleMesh, Vector};

/// Crossing-lattice parameters. The lattice is spanned by `spacing_u` along
/// the stripe curves and by a second family at `angle_deg` to them, whose
/// crossings are `spacing_v` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripeParams {
    pub spacing_u: f64,
    pub spacing_v: f64,
    pub angle_deg: f64,
    pub guidance: Axis,
}

/// Seeds at the crossings of two stripe families.
///
/// The first family is the set of cross-section curves of the base with
/// planes orthogonal to the guidance axis, spaced `spacing_v * sin(angle)`
/// apart. Along each curve, seeds sit at arc lengths
/// `(u + 1/2) * spacing_u + k * spacing_v * cos(angle)`, `k` being the row.
/// On closed curves the spacing is adjusted so a whole number of seeds fits,
/// and arc length starts where the curve crosses the azimuth-zero half plane
/// around the axis. Open curves start at their lexicographically smaller end.
pub fn sample_stripes(base: &TriangleMesh, params: &StripeParams) -> Result<Vec<SeedPlacement>> {
    if !(params.spacing_u > 0.0 && params.spacing_v > 0.0) {
        return Err(Error::InvalidArgument("stripe spacings must be positive".into()));
    }
    if !(params.angle_deg > 0.0 && params.angle_deg < 180.0) {
        return Err(Error::InvalidArgument(format!(
            "stripe angle must be in (0, 180), got {}",
            params.angle_deg
        )));
    }
    let axis = params.guidance.index();
    let normal = params.guidance.unit();
    let bb = base.bbox();
    let (tmin, tmax) = (bb.min[axis], bb.max[axis]);
    if tmax - tmin <= 1e-12 * bb.diagonal().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateAxis);
    }
    let theta = params.angle_deg.to_radians();
    let row_step = params.spacing_v * theta.sin();
    let shift = params.spacing_v * theta.cos();
    let center = bb.center();
    let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
    let bvh = TriangleBvh::new(base);
    let mut seeds = Vec::new();

    let mut k: i64 = 0;
    loop {
        let t = tmin + (k as f64 + 0.5) * row_step;
        if t >= tmax {
            break;
        }
        for line in slice_polylines(base, &normal, t) {
            let (pts, closed) = arrange(&line, &center, a1, a2);
            let total = polyline_length(&pts, closed);
            if total <= 1e-12 {
                continue;
            }
            let row_shift = k as f64 * shift;
            let stations: Vec<(i64, f64)> = if closed {
                let cols = ((total / params.spacing_u).round() as i64).max(1);
                let su = total / cols as f64;
                (0..cols)
                    .map(|u| (u, ((u as f64 + 0.5) * su + row_shift).rem_euclid(total)))
                    .collect()
            } else {
                let su = params.spacing_u;
                let first = ((-row_shift) / su - 0.5).ceil() as i64;
                (first..)
                    .map(|u| (u, (u as f64 + 0.5) * su + row_shift))
                    .take_while(|&(_, s)| s <= total + 1e-12)
                    .collect()
            };
            for (u, s) in stations {
                let (p, dir) = point_at(&pts, closed, s);
                let hit = bvh.closest_point(&p);
                let n = base.interpolated_normal(&hit);
                let tangent = {
                    let v = dir - n * n.dot(&dir);
                    if v.norm() > 1e-9 {
                        v.normalize()
                    } else {
                        reference_tangent(&n)
                    }
                };
                let mut seed = SeedPlacement::new(p, n, tangent);
                seed.stripe_uv = Some([u, k]);
                seeds.push(seed);
            }
        }
        k += 1;
    }
    Ok(seeds)
}

/// Reorders a section curve to start at its canonical origin.
fn arrange(line: &Polyline, center: &Point, a1: usize, a2: usize) -> (Vec<Point>, bool) {
    let pts = &line.points;
    if !line.closed {
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        let mut out = pts.clone();
        if lex_less(&last, &first) {
            out.reverse();
        }
        return (out, false);
    }
    let phi = |p: &Point| (p[a2] - center[a2]).atan2(p[a1] - center[a1]);
    let n = pts.len();
    // segment crossing azimuth zero from below, away from the +-pi seam
    for i in 0..n {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        let (fp, fq) = (phi(&p), phi(&q));
        if fp < 0.0 && fq >= 0.0 && fq - fp < std::f64::consts::PI {
            let s = -fp / (fq - fp);
            let start = p + (q - p) * s;
            let mut out = vec![start];
            for j in 0..n {
                let next = pts[(i + 1 + j) % n];
                if (next - out[out.len() - 1]).norm() > 1e-15 {
                    out.push(next);
                }
            }
            if out.len() > 1 && (out[0] - out[out.len() - 1]).norm() <= 1e-15 {
                out.pop();
            }
            return (out, true);
        }
    }
    // curves not winding around the axis start at their smallest point
    let i = (0..n).min_by(|&a, &b| lex_cmp(&pts[a], &pts[b])).unwrap();
    let mut out = pts.clone();
    out.rotate_left(i);
    (out, true)
}

fn lex_cmp(a: &Point, b: &Point) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
}

fn lex_less(a: &Point, b: &Point) -> bool {
    lex_cmp(a, b).is_lt()
}

fn polyline_length(pts: &[Point], closed: bool) -> f64 {
    let open: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    if closed {
        open + (pts[0] - pts[pts.len() - 1]).norm()
    } else {
        open
    }
}

/// Point at arc length `s` and the unit direction of its segment.
fn point_at(pts: &[Point], closed: bool, s: f64) -> (Point, Vector) {
    let n = pts.len();
    let segs = if closed { n } else { n - 1 };
    let mut acc = 0.0;
    let mut last = (pts[0], Vector::zeros());
    for i in 0..segs {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        let len = (q - p).norm();
        if len <= 0.0 {
            continue;
        }
        let dir = (q - p) / len;
        if s <= acc + len {
            let f = ((s - acc) / len).clamp(0.0, 1.0);
            return (p + (q - p) * f, dir);
        }
        acc += len;
        last = (q, dir);
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use std::collections::HashSet;
    use std::f64::consts::PI;

    fn params(su: f64, sv: f64, angle: f64, guidance: Axis) -> StripeParams {
        StripeParams {
            spacing_u: su,
            spacing_v: sv,
            angle_deg: angle,
            guidance,
        }
    }

    #[test]
    fn cylinder_lattice_is_12_by_5() {
        let (r, h) = (1.0, 3.0);
        let c = shapes::cylinder(r, h, 96);
        let seeds = sample_stripes(&c, &params(2.0 * PI * r / 12.0, h / 5.0, 90.0, Axis::Z)).unwrap();
        assert_eq!(seeds.len(), 60);
        let uv: HashSet<[i64; 2]> = seeds.iter().map(|s| s.stripe_uv.unwrap()).collect();
        assert_eq!(uv.len(), 60);
        for s in &seeds {
            assert!(s.validate(1).is_ok());
            // tangent runs around the cylinder
            assert!(s.tangent.z.abs() < 1e-2);
        }
    }

    // lattice index -> expected unfolded position on a flat patch
    fn planar_check(angle: f64) {
        let p = shapes::plane_patch(4.0, 4.0, 16, 16);
        let (su, sv) = (0.4, 0.4);
        let theta = angle.to_radians();
        let seeds = sample_stripes(&p, &params(su, sv, angle, Axis::X)).unwrap();
        assert!(seeds.len() > 20);
        // rows are planes x = const; along-row coordinate is y
        let origin = |s: &SeedPlacement| {
            let [u, k] = s.stripe_uv.unwrap();
            let along = (u as f64 + 0.5) * su + k as f64 * sv * theta.cos();
            let across = (k as f64 + 0.5) * sv * theta.sin();
            (across, along)
        };
        for s in &seeds {
            let (x, y) = origin(s);
            assert!((s.position.x - x).abs() < 1e-6, "{:?}", s.position);
            assert!((s.position.y - y).abs() < 1e-6, "{:?}", s.position);
        }
    }

    #[test]
    fn right_angle_lattice_matches_spacings() {
        planar_check(90.0);
        let p = shapes::plane_patch(4.0, 4.0, 16, 16);
        let seeds = sample_stripes(&p, &params(0.4, 0.3, 90.0, Axis::X)).unwrap();
        for s in &seeds {
            let nearest = seeds
                .iter()
                .filter(|t| !std::ptr::eq(*t, s))
                .map(|t| (t.position - s.position).norm())
                .fold(f64::INFINITY, f64::min);
            assert!((nearest - 0.3).abs() < 1e-6 || (nearest - 0.4).abs() < 1e-6);
        }
    }

    #[test]
    fn sixty_degree_rows_offset_by_half_spacing() {
        planar_check(60.0);
        let p = shapes::plane_patch(4.0, 4.0, 16, 16);
        let seeds = sample_stripes(&p, &params(0.4, 0.4, 60.0, Axis::X)).unwrap();
        let row = |k: i64| {
            let mut ys: Vec<f64> = seeds
                .iter()
                .filter(|s| s.stripe_uv.unwrap()[1] == k)
                .map(|s| s.position.y)
                .collect();
            ys.sort_by(f64::total_cmp);
            ys
        };
        let (r0, r1) = (row(0), row(1));
        let offset = (r1[0] - r0[0]).rem_euclid(0.4);
        assert!((offset - 0.2).abs() < 1e-6, "offset {offset}");
    }

    #[test]
    fn flat_axis_is_degenerate() {
        let p = shapes::plane_patch(1.0, 1.0, 2, 2);
        assert!(matches!(
            sample_stripes(&p, &params(0.1, 0.1, 90.0, Axis::Z)),
            Err(Error::DegenerateAxis)
        ));
    }

    #[test]
    fn cylinder_unrolls_to_lattice() {
        let (r, h) = (1.0, 2.0);
        let c = shapes::cylinder(r, h, 256);
        let su = 2.0 * PI * r / 16.0;
        let seeds = sample_stripes(&c, &params(su, 0.25, 90.0, Axis::Z)).unwrap();
        // on the polygonal cylinder, arc length is measured on the polygon;
        // unfolded rows are the exact lattice in (arc length, height)
        let perimeter = 2.0 * 256.0 * r * (PI / 256.0).sin();
        let su_eff = perimeter / 16.0;
        for s in &seeds {
            let [u, k] = s.stripe_uv.unwrap();
            assert!((s.position.z - (k as f64 + 0.5) * 0.25).abs() < 1e-9);
            let phi = s.position.y.atan2(s.position.x).rem_euclid(2.0 * PI);
            let arc = phi / (2.0 * PI) * perimeter;
            assert!((arc - (u as f64 + 0.5) * su_eff).abs() < 1e-3, "u {u} arc {arc}");
        }
    }
}
