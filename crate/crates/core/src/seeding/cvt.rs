use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::SeedPlacement;
use crate::error::{Error, Result};
use crate::mesh::{reference_tangent, Aabb, ClosestPoint, Point, TriangleBvh, TriangleMesh, Vector};

/// Dense surface sample budget for the Lloyd iterations. Fewer than a few
/// hundred samples per seed lets the discrete iteration stall in
/// configurations with closely spaced pairs.
const MIN_SAMPLES: usize = 2000;
const SAMPLES_PER_SEED: usize = 400;
const MIN_SAMPLES_PER_SEED: usize = 50;
const SAMPLE_CAP: usize = 1_000_000;

/// Positions after relaxation and the sample-based CVT energy after each
/// iteration (`energies[k]` is measured with the seeds after `k` iterations).
#[derive(Debug, Clone)]
pub struct CvtRun {
    pub seeds: Vec<ClosestPoint>,
    pub energies: Vec<f64>,
}

struct AreaSampler {
    cumulative: Vec<f64>,
}

impl AreaSampler {
    fn new(mesh: &TriangleMesh) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..mesh.triangle_count())
            .map(|t| {
                let [a, b, c] = mesh.triangle(t);
                acc += 0.5 * (b - a).cross(&(c - a)).norm();
                acc
            })
            .collect();
        AreaSampler { cumulative }
    }

    fn sample(&self, mesh: &TriangleMesh, rng: &mut ChaCha8Rng) -> ClosestPoint {
        let total = *self.cumulative.last().expect("mesh is non-empty");
        let r = rng.random::<f64>() * total;
        let t = self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1);
        let (r1, r2) = (rng.random::<f64>(), rng.random::<f64>());
        let s = r1.sqrt();
        let bary = [1.0 - s, s * (1.0 - r2), s * r2];
        let [a, b, c] = mesh.triangle(t);
        let point = Point::from(a.coords * bary[0] + b.coords * bary[1] + c.coords * bary[2]);
        ClosestPoint {
            point,
            triangle: t,
            distance_sq: 0.0,
            barycentric: bary,
        }
    }
}

/// Uniform bucket grid over seed positions for nearest-seed queries.
struct SeedGrid {
    min: Point,
    cell: f64,
    dims: [usize; 3],
    cells: Vec<Vec<u32>>,
}

impl SeedGrid {
    fn new(bbox: &Aabb, cell: f64, seeds: &[Point]) -> Self {
        let ext = bbox.extent();
        let cell = cell.max(ext.max() / 128.0).max(1e-12);
        let dims = [0, 1, 2].map(|a| ((ext[a] / cell).floor() as usize + 1).min(129));
        let mut grid = SeedGrid {
            min: bbox.min,
            cell,
            dims,
            cells: vec![Vec::new(); dims[0] * dims[1] * dims[2]],
        };
        for (i, p) in seeds.iter().enumerate() {
            let c = grid.cell_of(p);
            let idx = grid.flat(c);
            grid.cells[idx].push(i as u32);
        }
        grid
    }

    fn cell_of(&self, p: &Point) -> [usize; 3] {
        [0, 1, 2].map(|a| (((p[a] - self.min[a]) / self.cell).floor().max(0.0) as usize).min(self.dims[a] - 1))
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    /// Nearest seed to `p`, ties to the lower index.
    fn nearest(&self, p: &Point, seeds: &[Point]) -> (usize, f64) {
        let c = self.cell_of(p);
        let mut best = (usize::MAX, f64::INFINITY);
        let max_ring = self.dims.iter().copied().max().unwrap_or(1);
        for r in 0..=max_ring {
            let r = r as i64;
            let lo = [0, 1, 2].map(|a| (c[a] as i64 - r).max(0));
            let hi = [0, 1, 2].map(|a| (c[a] as i64 + r).min(self.dims[a] as i64 - 1));
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let on_shell = (x - c[0] as i64).abs() == r
                            || (y - c[1] as i64).abs() == r
                            || (z - c[2] as i64).abs() == r;
                        if !on_shell {
                            continue;
                        }
                        let idx = self.flat([x as usize, y as usize, z as usize]);
                        for &s in &self.cells[idx] {
                            let d = (seeds[s as usize] - p).norm_squared();
                            if d < best.1 || (d == best.1 && (s as usize) < best.0) {
                                best = (s as usize, d);
                            }
                        }
                    }
                }
            }
            // cells beyond ring r are at least r cells away from p
            let reach = r as f64 * self.cell;
            if best.0 != usize::MAX && best.1 < reach * reach {
                break;
            }
        }
        best
    }
}

/// Surface-restricted Lloyd relaxation of `n` seeds.
///
/// Seeds start as a uniform-area random sample drawn from a ChaCha8 stream
/// seeded with `rng_seed`. A dense sample of `400 n` surface points (at least
/// 2000, and capped at one million unless that leaves fewer than 50 per seed),
/// drawn next from the same stream, stands in for the surface: each iteration
/// assigns samples to their nearest seed, moves every seed to the centroid of
/// its samples and projects it back to the closest surface point. Because the
/// projection is a closest point, the sample energy never increases.
pub fn lloyd_relax(mesh: &TriangleMesh, n: usize, iterations: usize, rng_seed: u64) -> Result<CvtRun> {
    if n == 0 {
        return Err(Error::InvalidArgument("seed count must be at least 1".into()));
    }
    let limit = 10 * mesh.triangle_count();
    if n > limit {
        return Err(Error::InsufficientResolution { requested: n, limit });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sampler = AreaSampler::new(mesh);
    let mut seeds: Vec<ClosestPoint> = (0..n).map(|_| sampler.sample(mesh, &mut rng)).collect();
    if iterations == 0 {
        return Ok(CvtRun {
            seeds,
            energies: Vec::new(),
        });
    }
    let m = (SAMPLES_PER_SEED * n)
        .min(SAMPLE_CAP.max(MIN_SAMPLES_PER_SEED * n))
        .max(MIN_SAMPLES);
    let samples: Vec<Point> = (0..m).map(|_| sampler.sample(mesh, &mut rng).point).collect();
    let bvh = TriangleBvh::new(mesh);
    let bbox = mesh.bbox();
    let cell = 1.5 * (mesh.surface_area() / n as f64).sqrt();
    let mut energies = Vec::with_capacity(iterations + 1);

    let assign = |positions: &[Point]| -> Vec<(usize, f64)> {
        let grid = SeedGrid::new(&bbox, cell, positions);
        samples.par_iter().map(|p| grid.nearest(p, positions)).collect()
    };

    for _ in 0..iterations {
        let positions: Vec<Point> = seeds.iter().map(|s| s.point).collect();
        let owners = assign(&positions);
        energies.push(owners.iter().map(|o| o.1).sum());
        // accumulate in sample order so the result does not depend on threading
        let mut sums = vec![Vector::zeros(); n];
        let mut counts = vec![0usize; n];
        for (p, &(s, _)) in samples.iter().zip(&owners) {
            sums[s] += p.coords;
            counts[s] += 1;
        }
        let updated: Vec<ClosestPoint> = (0..n)
            .into_par_iter()
            .map(|i| {
                if counts[i] == 0 {
                    seeds[i]
                } else {
                    bvh.closest_point(&Point::from(sums[i] / counts[i] as f64))
                }
            })
            .collect();
        seeds = updated;
    }
    let positions: Vec<Point> = seeds.iter().map(|s| s.point).collect();
    energies.push(assign(&positions).iter().map(|o| o.1).sum());
    Ok(CvtRun { seeds, energies })
}

/// `n` isotropically distributed seeds; see [`lloyd_relax`]. Tangents come
/// from a fixed reference axis projected onto the tangent plane.
pub fn sample_isotropic(
    base: &TriangleMesh,
    n: usize,
    iterations: usize,
    rng_seed: u64,
) -> Result<Vec<SeedPlacement>> {
    let run = lloyd_relax(base, n, iterations, rng_seed)?;
    Ok(run
        .seeds
        .iter()
        .map(|hit| {
            let normal = base.interpolated_normal(hit);
            SeedPlacement::new(hit.point, normal, reference_tangent(&normal))
        })
        .collect())
}
