//! Overlap resolution and volume recovery by competing fast-marching fronts.

mod eikonal;
mod recover;

use std::cmp::Ordering;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::ScalarGrid;
use crate::voxel::{grid_overlap, squared_distance_transform, BaseSlabs, Coord, DecorationInstance, GridBox, VoxelGrid};

pub use eikonal::{march_arrival_times, march_arrival_times_from, upwind_update};
pub use recover::{fast_march_recover, neighbor_lists, Claim, GrowthTrace};

/// Order in which fronts claim voxels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// One claim per instance with unmet deficit per round, in id order.
    #[default]
    RoundRobin,
    /// The smallest arrival time over all fronts claims next.
    GlobalMin,
}

/// Shape of the volume recovery function and the growth schedule.
///
/// `a` and `b` are fractions of the instance's bounding-box diagonal: the
/// distance from contact of fastest growth and the distance beyond which the
/// front does not move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryParams {
    pub a: f64,
    pub b: f64,
    /// Speed used where an instance has no contact at all.
    pub ambient_speed: f64,
    pub schedule: Schedule,
}

impl Default for RecoveryParams {
    fn default() -> Self {
        RecoveryParams {
            a: 0.1,
            b: 0.3,
            ambient_speed: 1.0,
            schedule: Schedule::RoundRobin,
        }
    }
}

impl RecoveryParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let p = RecoveryParams {
            a,
            b,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a < self.b && self.b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "recovery parameters need 0 < a < b, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(self.ambient_speed > 0.0 && self.ambient_speed.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ambient speed must be positive, got {}",
                self.ambient_speed
            )));
        }
        Ok(())
    }
}

/// Volume recovery function: a C1 bump built from three quadratics. Zero at
/// contact, peak 1 at `a`, zero from `b` on. Infinite distance (no contact)
/// maps to the ambient speed.
pub fn recovery_velocity(x: f64, params: &RecoveryParams) -> f64 {
    let RecoveryParams { a, b, .. } = *params;
    if x == f64::INFINITY {
        return params.ambient_speed;
    }
    if !(x > 0.0) {
        return 0.0;
    }
    let mid = 0.5 * (a + b);
    let w = b - a;
    if x <= a {
        -x * x / (a * a) + 2.0 * x / a
    } else if x <= mid {
        1.0 - 2.0 * (x - a) * (x - a) / (w * w)
    } else if x <= b {
        2.0 * (x - b) * (x - b) / (w * w)
    } else {
        0.0
    }
}

/// Squared distance from voxel `g` to an instance centroid, scaled by
/// `(2 n)^2` and kept exact: `|n (2 g + 1) - S|^2`.
fn scaled_distance(g: &Coord, sum: &[i64; 3], n: usize) -> i128 {
    (0..3)
        .map(|a| {
            let d = n as i128 * (2 * g[a] + 1) as i128 - sum[a] as i128;
            d * d
        })
        .sum()
}

/// Compares the distances from `g` to the placement centroids of two
/// instances exactly.
fn compare_centroid_distance(g: &Coord, a: &DecorationInstance, b: &DecorationInstance) -> Ordering {
    let da = scaled_distance(g, &a.centroid_sum, a.original_volume);
    let db = scaled_distance(g, &b.centroid_sum, b.original_volume);
    let (na, nb) = (a.original_volume as i128, b.original_volume as i128);
    match (da.checked_mul(nb * nb), db.checked_mul(na * na)) {
        (Some(x), Some(y)) => x.cmp(&y),
        _ => {
            let fa = da as f64 / (na * na) as f64;
            let fb = db as f64 / (nb * nb) as f64;
            fa.total_cmp(&fb)
        }
    }
}

/// Removes shared voxels from every instance except the one whose placement
/// centroid is closest (ties to the lower id), then removes voxels inside the
/// base. Removed counts accumulate into `lost_volume`.
pub fn resolve_overlaps(mut instances: Vec<DecorationInstance>, base: &BaseSlabs) -> Result<Vec<DecorationInstance>> {
    for w in instances.windows(2) {
        w[0].grid.check_lattice(&w[1].grid)?;
    }
    let neighbors = neighbor_lists(&instances);
    let removals: Vec<Vec<Coord>> = (0..instances.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<Coord>> {
            let me = &instances[i];
            let mut lost = Vec::new();
            for &j in &neighbors[i] {
                let other = &instances[j];
                for g in grid_overlap(&me.grid, &other.grid)? {
                    let loses = match compare_centroid_distance(&g, me, other) {
                        Ordering::Greater => true,
                        Ordering::Less => false,
                        Ordering::Equal => (other.id, j) < (me.id, i),
                    };
                    if loses {
                        lost.push(g);
                    }
                }
            }
            lost.sort_unstable();
            lost.dedup();
            Ok(lost)
        })
        .collect::<Result<_>>()?;
    for (i, (inst, lost)) in instances.iter_mut().zip(removals).enumerate() {
        let mut removed = 0;
        for g in &lost {
            if inst.grid.get(g) {
                inst.grid.set(g, false);
                removed += 1;
            }
        }
        if let Some(slab) = base.slab(i) {
            inst.grid.check_lattice(slab)?;
            for g in grid_overlap(&inst.grid, slab)? {
                inst.grid.set(&g, false);
                removed += 1;
            }
        }
        inst.lost_volume += removed;
        if inst.grid.occupied_count() == 0 {
            return Err(Error::Submerged { instance: inst.id });
        }
    }
    Ok(instances)
}

/// Euclidean distance (model units) from each voxel of the instance grid to
/// the nearest contact voxel: an occupied voxel of the instance 6-adjacent to
/// a voxel of another instance or of the base. `+inf` everywhere without
/// contact.
pub fn contact_distance_field(
    instance: &DecorationInstance,
    others: &[&VoxelGrid],
    base: Option<&VoxelGrid>,
) -> Result<ScalarGrid> {
    let grid = &instance.grid;
    let h = grid.voxel_edge();
    for o in others.iter().copied().chain(base) {
        grid.check_lattice(o)?;
    }
    let foreign = |g: &Coord| base.is_some_and(|b| b.get(g)) || others.iter().any(|o| o.get(g));
    let contact: Vec<bool> = (0..grid.len())
        .map(|k| {
            grid.occupancy()[k] && {
                let g = grid.coord_of(k);
                eikonal::neighbors6(g).iter().any(foreign)
            }
        })
        .collect();
    let values = squared_distance_transform(&contact, grid.dims())
        .into_iter()
        .map(|d2| d2.sqrt() * h)
        .collect();
    ScalarGrid::new(grid.origin(), h, grid.dims(), values)
}

/// Loss weights normalised by the mean loss of instances that lost voxels.
pub fn loss_weights(losses: &[usize]) -> Vec<f64> {
    let positive: Vec<f64> = losses.iter().filter(|&&l| l > 0).map(|&l| l as f64).collect();
    if positive.is_empty() {
        return vec![0.0; losses.len()];
    }
    let mean = positive.iter().sum::<f64>() / positive.len() as f64;
    losses.iter().map(|&l| l as f64 / mean).collect()
}

/// Velocity grid `weight * f(d / diagonal)` co-registered with the instance.
pub fn build_velocity_field(
    instance: &DecorationInstance,
    distances: &ScalarGrid,
    params: &RecoveryParams,
    weight: f64,
) -> Result<ScalarGrid> {
    if distances.dims() != instance.grid.dims() {
        return Err(Error::InvalidArgument("distance field is not co-registered with the instance".into()));
    }
    let diag = instance.diagonal;
    let values = distances
        .values()
        .iter()
        .map(|&d| {
            if weight == 0.0 {
                0.0
            } else {
                weight * recovery_velocity(d / diag, params)
            }
        })
        .collect();
    ScalarGrid::new(distances.origin(), distances.voxel_edge(), distances.dims(), values)
}

/// Per-instance line of the deformation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub id: usize,
    pub original_volume: usize,
    pub lost_volume: usize,
    pub recovered_volume: usize,
    pub final_volume: usize,
    pub weight: f64,
    pub rounds: usize,
    pub mean_arrival_time: Option<f64>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformReport {
    pub params: RecoveryParams,
    pub instances: Vec<InstanceReport>,
    pub decoration_voxels: usize,
    pub lost_voxels: usize,
    /// Lost voxels over decoration voxels, in percent.
    pub overlap_percentage: f64,
    pub resolve_time: f64,
    pub distance_time: f64,
    pub march_time: f64,
    /// Instances whose grids were enlarged, in order.
    #[serde(default)]
    pub regridded: Vec<usize>,
}

impl DeformReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Result of the deformation stage.
#[derive(Debug, Clone)]
pub struct Deformation {
    pub instances: Vec<DecorationInstance>,
    pub traces: Vec<GrowthTrace>,
    pub report: DeformReport,
}

/// Contact distances and velocity of instance `k` against its neighbours.
fn instance_velocity(
    resolved: &[DecorationInstance],
    neighbors: &[usize],
    k: usize,
    base: &BaseSlabs,
    params: &RecoveryParams,
    weight: f64,
) -> Result<ScalarGrid> {
    let others: Vec<&VoxelGrid> = neighbors.iter().map(|&j| &resolved[j].grid).collect();
    let d = contact_distance_field(&resolved[k], &others, base.slab(k))?;
    build_velocity_field(&resolved[k], &d, params, weight)
}

/// Resolve, build contact distances and velocities, then grow every instance
/// back to its placement volume.
pub fn deform(instances: Vec<DecorationInstance>, base: &BaseSlabs, params: &RecoveryParams) -> Result<Deformation> {
    let (d, _) = deform_with_regrid(instances, base.clone(), params, 0, |_, _| Ok(None))?;
    Ok(d)
}

/// [`deform`] that enlarges the grid of an instance whose front reaches its
/// grid boundary (by half its extent per axis) and marches again, at most
/// `max_regrids` times. `base_slab` supplies base occupancy over an enlarged
/// grid dilated by two voxels. Overlap resolution and the fields of the
/// other instances do not depend on grid boxes, so they are reused.
///
/// Returns the base slabs matching the final grids.
pub fn deform_with_regrid<F>(
    instances: Vec<DecorationInstance>,
    mut base: BaseSlabs,
    params: &RecoveryParams,
    max_regrids: usize,
    base_slab: F,
) -> Result<(Deformation, BaseSlabs)>
where
    F: Fn(&GridBox, f64) -> Result<Option<VoxelGrid>>,
{
    params.validate()?;
    let t0 = Instant::now();
    let mut resolved = resolve_overlaps(instances, &base)?;
    let resolve_time = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut neighbors = neighbor_lists(&resolved);
    let losses: Vec<usize> = resolved.iter().map(|i| i.lost_volume).collect();
    let weights = loss_weights(&losses);
    let mut velocities: Vec<ScalarGrid> = (0..resolved.len())
        .into_par_iter()
        .map(|k| instance_velocity(&resolved, &neighbors[k], k, &base, params, weights[k]))
        .collect::<Result<_>>()?;
    let mut distance_time = t1.elapsed().as_secs_f64();

    let mut march_time = 0.0;
    let mut regridded = Vec::new();
    let (instances, traces) = loop {
        let t2 = Instant::now();
        let defer = regridded.len() < max_regrids;
        let (done, traces, hits) = recover::march(resolved.clone(), &velocities, &base, params.schedule, defer)?;
        march_time += t2.elapsed().as_secs_f64();
        if hits.is_empty() {
            break (done, traces);
        }
        let t = Instant::now();
        for &instance in hits.iter().take(max_regrids - regridded.len()) {
            let k = resolved
                .iter()
                .position(|i| i.id == instance)
                .expect("boundary hit names a known instance");
            let old = resolved[k].grid.bounds();
            let pad = old.dims().map(|d| d.div_ceil(4) as i64);
            let bounds = GridBox::new(
                [0, 1, 2].map(|a| old.min[a] - pad[a]),
                [0, 1, 2].map(|a| old.max[a] + pad[a]),
            );
            log::info!("instance {instance} reached its grid boundary; enlarging its grid to {:?}", bounds.dims());
            let h = resolved[k].voxel_edge();
            resolved[k].grid = resolved[k].grid.reboxed(bounds)?;
            base.set_slab(k, base_slab(&bounds.dilated(2), h)?);
            regridded.push(instance);
        }
        neighbors = neighbor_lists(&resolved);
        // only regridded instances have new boxes; their fields are rebuilt
        let fresh: Vec<(usize, ScalarGrid)> = (0..resolved.len())
            .into_par_iter()
            .filter(|&k| hits.contains(&resolved[k].id))
            .map(|k| instance_velocity(&resolved, &neighbors[k], k, &base, params, weights[k]).map(|v| (k, v)))
            .collect::<Result<_>>()?;
        for (k, v) in fresh {
            velocities[k] = v;
        }
        distance_time += t.elapsed().as_secs_f64();
    };

    let decoration_voxels: usize = instances.iter().map(|i| i.original_volume).sum();
    let lost_voxels: usize = instances.iter().map(|i| i.lost_volume).sum();
    let report = DeformReport {
        params: *params,
        instances: instances
            .iter()
            .zip(&traces)
            .zip(&weights)
            .map(|((inst, t), &w)| InstanceReport {
                id: inst.id,
                original_volume: inst.original_volume,
                lost_volume: inst.lost_volume,
                recovered_volume: inst.recovered_volume,
                final_volume: inst.grid.occupied_count(),
                weight: w,
                rounds: t.rounds,
                mean_arrival_time: t.mean_arrival_time(),
                wall_time: t.wall_time,
            })
            .collect(),
        decoration_voxels,
        lost_voxels,
        overlap_percentage: if decoration_voxels > 0 {
            100.0 * lost_voxels as f64 / decoration_voxels as f64
        } else {
            0.0
        },
        resolve_time,
        distance_time,
        march_time,
        regridded,
    };
    log::info!(
        "deformed {} instances: {:.1}% overlap, {} voxels recovered",
        instances.len(),
        report.overlap_percentage,
        lost_voxels
    );
    Ok((
        Deformation {
            instances,
            traces,
            report,
        },
        base,
    ))
}
