use super::{footprint_area, lloyd_relax, sample_isotropic, seed_count_for_coverage, Footprint, SeedPlacement};
use crate::error::{Error, Result};
use crate::mesh::{compute_sdf_grid, extract_isosurface, reference_tangent, TriangleBvh, TriangleMesh};

/// SDF samples across the base bounding-box diagonal used for offset surfaces.
const OFFSET_GRID_RESOLUTION: f64 = 128.0;

/// Isosurface of the base's signed distance at `distance` (outward positive).
pub fn offset_surface(base: &TriangleMesh, distance: f64) -> Result<TriangleMesh> {
    if !(distance >= 0.0) {
        return Err(Error::InvalidArgument(format!("offset distance must be non-negative, got {distance}")));
    }
    let h = base.bbox().diagonal() / OFFSET_GRID_RESOLUTION;
    let grid = compute_sdf_grid(base, h, distance + 3.0 * h)?;
    extract_isosurface(&grid, distance)
}

/// Seeds sampled on the offset surface at the decoration's maximal-section
/// height, then mapped back to the base by closest-point projection.
pub fn sample_offset_for(
    base: &TriangleMesh,
    decoration: &TriangleMesh,
    coverage: f64,
    cvt_iterations: usize,
    rng_seed: u64,
) -> Result<Vec<SeedPlacement>> {
    let fp = footprint_area(decoration)?;
    sample_offset(base, fp, coverage, None, cvt_iterations, rng_seed)
}

/// Offset-surface sampling with an explicit footprint. `distance` overrides
/// the footprint height; a zero distance is plain isotropic sampling.
///
/// The seed count follows from the offset surface's area, so decorations
/// standing off a convex region are spread over the area their widest section
/// actually occupies.
pub fn sample_offset(
    base: &TriangleMesh,
    footprint: Footprint,
    coverage: f64,
    distance: Option<f64>,
    cvt_iterations: usize,
    rng_seed: u64,
) -> Result<Vec<SeedPlacement>> {
    base.require_watertight()?;
    let d = distance.unwrap_or(footprint.height);
    if d <= 1e-12 * base.bbox().diagonal() {
        let n = seed_count_for_coverage(base.surface_area(), footprint.area, coverage);
        return sample_isotropic(base, n, cvt_iterations, rng_seed);
    }
    let offset = offset_surface(base, d)?;
    let n = seed_count_for_coverage(offset.surface_area(), footprint.area, coverage);
    log::debug!(
        "offset surface at d = {d:.4}: area {:.4}, {} seeds",
        offset.surface_area(),
        n
    );
    let run = lloyd_relax(&offset, n, cvt_iterations, rng_seed)?;
    let bvh = TriangleBvh::new(base);
    Ok(run
        .seeds
        .iter()
        .map(|s| {
            let hit = bvh.closest_point(&s.point);
            let normal = base.interpolated_normal(&hit);
            SeedPlacement::new(hit.point, normal, reference_tangent(&normal))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use std::f64::consts::PI;

    #[test]
    fn sphere_offset_area_and_count() {
        let base = shapes::icosphere(5.0, 4);
        let deco = shapes::icosphere(0.5, 3);
        let fp = footprint_area(&deco).unwrap();
        assert!((fp.height - 0.5).abs() < 0.03);
        let off = offset_surface(&base, fp.height).unwrap();
        let expected = 4.0 * PI * (5.0 + fp.height).powi(2);
        assert!((off.surface_area() - expected).abs() / expected < 0.03);
        let seeds = sample_offset(&base, fp, 1.4, None, 5, 3).unwrap();
        assert_eq!(seeds.len(), seed_count_for_coverage(off.surface_area(), fp.area, 1.4));
        let analytic = seed_count_for_coverage(4.0 * PI * 5.5 * 5.5, fp.area, 1.4) as f64;
        assert!((seeds.len() as f64 - analytic).abs() / analytic < 0.03);
    }

    #[test]
    fn zero_offset_matches_isotropic() {
        let base = shapes::icosphere(1.0, 3);
        let deco = shapes::icosphere(0.2, 2);
        let fp = footprint_area(&deco).unwrap();
        let a = sample_offset(&base, fp, 1.3, Some(0.0), 10, 9).unwrap();
        let n = seed_count_for_coverage(base.surface_area(), fp.area, 1.3);
        let b = sample_isotropic(&base, n, 10, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn torus_seeds_project_onto_base() {
        let base = shapes::torus(2.0, 0.6, 48, 24);
        let deco = shapes::icosphere(0.3, 2);
        let seeds = sample_offset_for(&base, &deco, 1.2, 5, 1).unwrap();
        let bvh = TriangleBvh::new(&base);
        for s in &seeds {
            assert!(bvh.closest_point(&s.position).distance() < 1e-6);
        }
        // some seeds land on the inner ring
        assert!(seeds.iter().any(|s| (s.position.x.hypot(s.position.y)) < 1.6));
    }
}
