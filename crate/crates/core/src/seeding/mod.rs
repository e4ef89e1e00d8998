//! Seed placement on the base surface: coverage-driven counts, isotropic CVT
//! sampling, offset-surface sampling, stripe lattices and perturbations.

mod cvt;
mod offset;
mod perturb;
mod stripes;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{section_area, Point, TriangleMesh, Vector};

pub use cvt::{lloyd_relax, sample_isotropic, CvtRun};
pub use offset::{offset_surface, sample_offset, sample_offset_for};
pub use perturb::perturb_seeds;
pub use stripes::{sample_stripes, StripeParams};

/// Number of z levels scanned when searching for the maximal cross-section.
pub const FOOTPRINT_LEVELS: usize = 1024;

/// One placed decoration: where it attaches, how it is oriented and scaled,
/// and which decoration mesh it uses.
///
/// The decoration's local frame maps `+z` to `normal` and `+x` to `tangent`;
/// its local origin lands on `position`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SeedRecord", into = "SeedRecord")]
pub struct SeedPlacement {
    pub position: Point,
    pub normal: Vector,
    pub tangent: Vector,
    pub scale: f64,
    pub decoration_index: usize,
    pub stripe_uv: Option<[i64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct SeedRecord {
    position: [f64; 3],
    normal: [f64; 3],
    tangent: [f64; 3],
    #[serde(default = "one")]
    scale: f64,
    #[serde(default)]
    decoration_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stripe_uv: Option<[i64; 2]>,
}

fn one() -> f64 {
    1.0
}

impl From<SeedRecord> for SeedPlacement {
    fn from(r: SeedRecord) -> Self {
        SeedPlacement {
            position: Point::from(r.position),
            normal: Vector::from(r.normal),
            tangent: Vector::from(r.tangent),
            scale: r.scale,
            decoration_index: r.decoration_index,
            stripe_uv: r.stripe_uv,
        }
    }
}

impl From<SeedPlacement> for SeedRecord {
    fn from(s: SeedPlacement) -> Self {
        SeedRecord {
            position: s.position.coords.into(),
            normal: s.normal.into(),
            tangent: s.tangent.into(),
            scale: s.scale,
            decoration_index: s.decoration_index,
            stripe_uv: s.stripe_uv,
        }
    }
}

impl SeedPlacement {
    /// Seed with unit scale and the first decoration.
    pub fn new(position: Point, normal: Vector, tangent: Vector) -> Self {
        SeedPlacement {
            position,
            normal,
            tangent,
            scale: 1.0,
            decoration_index: 0,
            stripe_uv: None,
        }
    }

    /// Checks frame orthonormality, the scale band and the decoration index.
    pub fn validate(&self, decoration_count: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if (self.normal.norm() - 1.0).abs() > 1e-6 || (self.tangent.norm() - 1.0).abs() > 1e-6 {
            return bad(format!("seed frame vectors must be unit length at {:?}", self.position));
        }
        if self.normal.dot(&self.tangent).abs() > 1e-6 {
            return bad(format!("seed tangent is not orthogonal to the normal at {:?}", self.position));
        }
        if !(0.9 - 1e-12..=1.1 + 1e-12).contains(&self.scale) {
            return bad(format!("seed scale {} outside [0.9, 1.1]", self.scale));
        }
        if self.decoration_index >= decoration_count {
            return bad(format!(
                "decoration index {} but only {decoration_count} decorations loaded",
                self.decoration_index
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeedingMethod {
    #[default]
    Isotropic,
    Offset,
    Stripes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RotationPolicy {
    /// Keep the sampler's tangent.
    #[default]
    None,
    /// Uniform random rotation about the normal.
    Random,
    /// Flip the tangent on seeds whose stripe coordinates have odd `u + v`.
    #[serde(rename = "alternate_180")]
    Alternate180,
    /// Keep the sampler's tangent, which stripe sampling aligns with the stripes.
    FieldAligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> Vector {
        let mut v = Vector::zeros();
        v[self.index()] = 1.0;
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedingConfig {
    pub method: SeedingMethod,
    /// Summed footprint area over base area.
    pub coverage: f64,
    /// Offset height for offset sampling; `None` uses the decoration's
    /// maximal-section height. Zero reduces offset sampling to isotropic.
    pub offset_distance: Option<f64>,
    pub cvt_iterations: usize,
    /// Stripe spacings; `None` derives a square cell from the coverage target.
    pub stripe_spacing_u: Option<f64>,
    pub stripe_spacing_v: Option<f64>,
    /// Crossing angle of the two stripe families, in degrees.
    pub stripe_angle: f64,
    pub guidance_axis: Axis,
    pub rotation_policy: RotationPolicy,
    pub size_jitter: f64,
    pub rng_seed: u64,
}

impl Default for SeedingConfig {
    fn default() -> Self {
        SeedingConfig {
            method: SeedingMethod::Isotropic,
            coverage: 1.4,
            offset_distance: None,
            cvt_iterations: 100,
            stripe_spacing_u: None,
            stripe_spacing_v: None,
            stripe_angle: 90.0,
            guidance_axis: Axis::Z,
            rotation_policy: RotationPolicy::None,
            size_jitter: 0.0,
            rng_seed: 0,
        }
    }
}

impl SeedingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.coverage > 0.0) {
            return bad(format!("coverage must be positive, got {}", self.coverage));
        }
        if !(self.stripe_angle > 0.0 && self.stripe_angle < 180.0) {
            return bad(format!("stripe angle must be in (0, 180), got {}", self.stripe_angle));
        }
        if !(0.0..=0.1).contains(&self.size_jitter) {
            return bad(format!("size jitter must be in [0, 0.1], got {}", self.size_jitter));
        }
        for s in [self.stripe_spacing_u, self.stripe_spacing_v].into_iter().flatten() {
            if !(s > 0.0) {
                return bad(format!("stripe spacing must be positive, got {s}"));
            }
        }
        if let Some(d) = self.offset_distance {
            if !(d >= 0.0) {
                return bad(format!("offset distance must be non-negative, got {d}"));
            }
        }
        Ok(())
    }
}

/// Maximal planar z-section of a decoration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub area: f64,
    /// z coordinate (decoration frame) of the lowest maximal section.
    pub z: f64,
    /// Height of that section above the decoration's lowest point.
    pub height: f64,
}

/// Area and height of the decoration's largest cross-section orthogonal to z.
///
/// Sections are evaluated at `FOOTPRINT_LEVELS` evenly spaced interior levels;
/// sections within 1e-9 relative of the maximum count as ties and the lowest
/// one wins.
pub fn footprint_area(decoration: &TriangleMesh) -> Result<Footprint> {
    decoration.require_watertight()?;
    let bb = decoration.bbox();
    let range = bb.max.z - bb.min.z;
    let levels: Vec<(f64, f64)> = (0..FOOTPRINT_LEVELS)
        .map(|k| {
            let z = bb.min.z + (k as f64 + 0.5) / FOOTPRINT_LEVELS as f64 * range;
            (z, section_area(decoration, &Vector::z(), z))
        })
        .collect();
    let max = levels.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    let (z, area) = levels
        .iter()
        .copied()
        .find(|l| l.1 >= max * (1.0 - 1e-9))
        .expect("at least one level");
    Ok(Footprint {
        area,
        z,
        height: z - bb.min.z,
    })
}

/// Seeds needed so that `n * footprint / base_area` approximates `coverage`.
pub fn seed_count_for_coverage(base_area: f64, footprint: f64, coverage: f64) -> usize {
    ((coverage * base_area / footprint).round() as usize).max(1)
}

/// Mean footprint over the decoration set, as used for coverage control.
pub fn mean_footprint(decorations: &[TriangleMesh]) -> Result<Footprint> {
    if decorations.is_empty() {
        return Err(Error::InvalidArgument("at least one decoration is required".into()));
    }
    let fps = decorations.iter().map(footprint_area).collect::<Result<Vec<_>>>()?;
    let n = fps.len() as f64;
    Ok(Footprint {
        area: fps.iter().map(|f| f.area).sum::<f64>() / n,
        z: fps.iter().map(|f| f.z).sum::<f64>() / n,
        height: fps.iter().map(|f| f.height).sum::<f64>() / n,
    })
}

/// Runs the configured sampler and perturbation for a base and decoration set.
pub fn generate_seeds(
    base: &TriangleMesh,
    decorations: &[TriangleMesh],
    config: &SeedingConfig,
) -> Result<Vec<SeedPlacement>> {
    config.validate()?;
    let fp = mean_footprint(decorations)?;
    let seeds = match config.method {
        SeedingMethod::Isotropic => {
            let n = seed_count_for_coverage(base.surface_area(), fp.area, config.coverage);
            sample_isotropic(base, n, config.cvt_iterations, config.rng_seed)?
        }
        SeedingMethod::Offset => sample_offset(
            base,
            fp,
            config.coverage,
            config.offset_distance,
            config.cvt_iterations,
            config.rng_seed,
        )?,
        SeedingMethod::Stripes => {
            let angle = config.stripe_angle.to_radians();
            let square = (fp.area / (config.coverage * angle.sin())).sqrt();
            let params = StripeParams {
                spacing_u: config.stripe_spacing_u.unwrap_or(square),
                spacing_v: config.stripe_spacing_v.unwrap_or(square),
                angle_deg: config.stripe_angle,
                guidance: config.guidance_axis,
            };
            sample_stripes(base, &params)?
        }
    };
    log::info!("sampled {} seeds ({:?})", seeds.len(), config.method);
    perturb_seeds(&seeds, config, decorations.len())
}

pub fn seeds_to_json(seeds: &[SeedPlacement]) -> Result<String> {
    Ok(serde_json::to_string_pretty(seeds)?)
}

pub fn write_seeds_json(seeds: &[SeedPlacement], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = seeds_to_json(seeds)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_seeds_json(path: impl AsRef<Path>) -> Result<Vec<SeedPlacement>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seeds: Vec<SeedPlacement> =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    // hand-written files need not be exactly normalized
    for s in &mut seeds {
        s.normal = s.normal.normalize();
        s.tangent = (s.tangent - s.normal * s.normal.dot(&s.tangent)).normalize();
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use std::f64::consts::PI;

    #[test]
    fn sphere_footprint_is_equator() {
        let s = shapes::icosphere(1.0, 4);
        let fp = footprint_area(&s).unwrap();
        assert!((fp.area - PI).abs() / PI < 0.03);
        assert!(fp.z.abs() < 0.05, "z {}", fp.z);
        assert!((fp.height - 1.0).abs() < 0.05);
    }

    #[test]
    fn sphere_footprint_matches_voxel_layer_oracle() {
        let s = shapes::icosphere(1.0, 3);
        let fp = footprint_area(&s).unwrap();
        // oracle: inside-voxel count per SDF layer, times the voxel face area
        let h = 0.02;
        let g = crate::mesh::compute_sdf_grid(&s, h, 0.1).unwrap();
        let [nx, ny, nz] = g.dims();
        let best = (0..nz)
            .map(|k| {
                let mut c = 0usize;
                for j in 0..ny {
                    for i in 0..nx {
                        if g.get(i, j, k) < 0.0 {
                            c += 1;
                        }
                    }
                }
                c as f64 * h * h
            })
            .fold(0.0, f64::max);
        assert!((fp.area - best).abs() / best < 0.03, "{} vs {best}", fp.area);
    }

    #[test]
    fn cube_footprint_lowest_layer() {
        let c = shapes::cube(Point::origin(), Point::new(1.0, 1.0, 1.0));
        let fp = footprint_area(&c).unwrap();
        assert!((fp.area - 1.0).abs() < 1e-9);
        assert!((fp.z - 0.5 / FOOTPRINT_LEVELS as f64).abs() < 1e-12);
    }

    #[test]
    fn cone_apex_down_peaks_at_top() {
        let c = shapes::cone_apex_down(1.0, 2.0, 64);
        let fp = footprint_area(&c).unwrap();
        assert!(fp.z > 2.0 * (1.0 - 1.0 / FOOTPRINT_LEVELS as f64));
    }

    #[test]
    fn open_decoration_is_rejected() {
        let p = shapes::plane_patch(1.0, 1.0, 2, 2);
        assert!(matches!(footprint_area(&p), Err(Error::NotWatertight { .. })));
    }

    #[test]
    fn coverage_counts() {
        assert_eq!(seed_count_for_coverage(100.0, 0.25, 1.2), 480);
        assert_eq!(seed_count_for_coverage(7.0, 7.0, 1.0), 1);
        assert_eq!(seed_count_for_coverage(1.0, 100.0, 0.1), 1);
        // round trip through the footprint implied by 400 seeds at coverage 1.43
        let area = 4.0 * PI;
        let fp = 1.43 * area / 400.0;
        assert_eq!(seed_count_for_coverage(area, fp, 1.43), 400);
    }

    #[test]
    fn seeds_json_round_trip() {
        let mut s = SeedPlacement::new(Point::new(1.0, 2.0, 3.0), Vector::z(), Vector::x());
        s.scale = 1.05;
        s.stripe_uv = Some([2, -1]);
        let t = SeedPlacement::new(Point::origin(), Vector::y(), Vector::z());
        let text = seeds_to_json(&[s.clone(), t.clone()]).unwrap();
        assert!(text.contains("\"decoration_index\""));
        let back: Vec<SeedPlacement> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![s, t]);
    }

    #[test]
    fn seed_validation() {
        let mut s = SeedPlacement::new(Point::origin(), Vector::z(), Vector::x());
        assert!(s.validate(1).is_ok());
        assert!(s.validate(0).is_err());
        s.scale = 1.2;
        assert!(s.validate(1).is_err());
        s.scale = 1.0;
        s.tangent = Vector::new(1.0, 0.0, 0.5).normalize();
        assert!(s.validate(1).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SeedingConfig::default().validate().is_ok());
        let c = SeedingConfig {
            stripe_angle: 180.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = SeedingConfig {
            coverage: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
