use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// First-order upwind solution of `|grad T| = 1 / F` at one voxel.
///
/// `neighbors` holds, per axis, the smaller arrival time of the two known
/// neighbours along that axis (`+inf` when neither is known); `step` is
/// `voxel_edge / F`. Axes are added in increasing order of their neighbour
/// value while the solution stays above it; when a quadratic has no real root
/// the solution falls back to the one-sided update.
pub fn upwind_update(neighbors: [f64; 3], step: f64) -> f64 {
    let mut a = neighbors;
    a.sort_by(f64::total_cmp);
    if !a[0].is_finite() || !(step.is_finite() && step > 0.0) {
        return f64::INFINITY;
    }
    let mut t = a[0] + step;
    let (mut sum, mut sum_sq) = (a[0], a[0] * a[0]);
    for m in 2..=3 {
        let next = a[m - 1];
        if !(next.is_finite() && t > next) {
            break;
        }
        sum += next;
        sum_sq += next * next;
        let mf = m as f64;
        let disc = sum * sum - mf * (sum_sq - step * step);
        if disc < 0.0 {
            break;
        }
        t = (sum + disc.sqrt()) / mf;
    }
    t
}

/// Heap entry ordered by time, then by lattice coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Entry {
    pub time: f64,
    pub coord: [i64; 3],
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.coord.cmp(&other.coord))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) type MinHeap = BinaryHeap<Reverse<Entry>>;

/// Arrival times from `sources` (time 0) over a dense x-fastest grid of
/// speeds with the classic fast marching method. Voxels with non-positive
/// speed are never reached.
pub fn march_arrival_times(speed: &[f64], dims: [usize; 3], voxel_edge: f64, sources: &[usize]) -> Vec<f64> {
    let initial: Vec<(usize, f64)> = sources.iter().map(|&s| (s, 0.0)).collect();
    march_arrival_times_from(speed, dims, voxel_edge, &initial)
}

/// [`march_arrival_times`] from voxels with given initial arrival times, such
/// as exact times in a small ball around a point source.
pub fn march_arrival_times_from(
    speed: &[f64],
    dims: [usize; 3],
    voxel_edge: f64,
    initial: &[(usize, f64)],
) -> Vec<f64> {
    let n = dims[0] * dims[1] * dims[2];
    assert_eq!(speed.len(), n, "speed field does not match dims");
    let mut time = vec![f64::INFINITY; n];
    let mut known = vec![false; n];
    let mut heap = MinHeap::new();
    let coord = |i: usize| [(i % dims[0]) as i64, ((i / dims[0]) % dims[1]) as i64, (i / (dims[0] * dims[1])) as i64];
    let index = |c: [i64; 3]| -> Option<usize> {
        (0..3)
            .all(|a| c[a] >= 0 && (c[a] as usize) < dims[a])
            .then(|| c[0] as usize + dims[0] * (c[1] as usize + dims[1] * c[2] as usize))
    };
    for &(s, t) in initial {
        if t < time[s] {
            time[s] = t;
            heap.push(Reverse(Entry { time: t, coord: coord(s) }));
        }
    }
    while let Some(Reverse(e)) = heap.pop() {
        let i = index(e.coord).expect("heap holds in-grid voxels");
        if known[i] || e.time != time[i] {
            continue;
        }
        known[i] = true;
        for nb in neighbors6(e.coord) {
            let Some(j) = index(nb) else { continue };
            if known[j] || speed[j] <= 0.0 {
                continue;
            }
            let mut mins = [f64::INFINITY; 3];
            for (axis, m) in mins.iter_mut().enumerate() {
                for d in [-1, 1] {
                    let mut c = nb;
                    c[axis] += d;
                    if let Some(k) = index(c) {
                        if known[k] {
                            *m = m.min(time[k]);
                        }
                    }
                }
            }
            let t = upwind_update(mins, voxel_edge / speed[j]);
            if t < time[j] {
                time[j] = t;
                heap.push(Reverse(Entry { time: t, coord: nb }));
            }
        }
    }
    time
}

#[inline]
pub(crate) fn neighbors6(g: [i64; 3]) -> [[i64; 3]; 6] {
    [
        [g[0] - 1, g[1], g[2]],
        [g[0] + 1, g[1], g[2]],
        [g[0], g[1] - 1, g[2]],
        [g[0], g[1] + 1, g[2]],
        [g[0], g[1], g[2] - 1],
        [g[0], g[1], g[2] + 1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sided_and_diagonal_updates() {
        let inf = f64::INFINITY;
        assert_eq!(upwind_update([0.0, inf, inf], 1.0), 1.0);
        let t = upwind_update([1.0, 1.0, inf], 1.0);
        assert!((t - (1.0 + 0.5f64.sqrt())).abs() < 1e-12);
        // far-apart neighbours: the larger one is not used
        assert_eq!(upwind_update([0.0, 5.0, 7.0], 1.0), 1.0);
        assert!(upwind_update([inf; 3], 1.0).is_infinite());
        assert!(upwind_update([0.0, inf, inf], inf).is_infinite());
    }

    #[test]
    fn update_satisfies_discrete_eikonal() {
        let cases = [[0.3, 0.5, 0.6], [1.0, 1.2, 2.5], [0.0, 0.1, 0.2]];
        for a in cases {
            let step = 0.7;
            let t = upwind_update(a, step);
            let residual: f64 = a.iter().map(|&v| (t - v).max(0.0).powi(2)).sum();
            assert!((residual - step * step).abs() < 1e-12, "{a:?}");
        }
    }

    #[test]
    fn uniform_speed_point_source_is_near_euclidean() {
        let n = 32;
        let dims = [n, n, n];
        let h = 0.1;
        let c = n / 2;
        let src = c + n * (c + n * c);
        let t = march_arrival_times(&vec![1.0; n * n * n], dims, h, &[src]);
        let mut worst: f64 = 0.0;
        for (i, &v) in t.iter().enumerate() {
            let g = [i % n, (i / n) % n, i / (n * n)];
            let d = g.iter().map(|&x| (x as f64 - c as f64).powi(2)).sum::<f64>().sqrt() * h;
            assert!(v >= d - 1e-9, "arrival below distance");
            worst = worst.max(v - d);
        }
        assert!(worst <= h * 3f64.sqrt(), "max error {worst}");
        // axis-aligned voxels are exact
        assert!((t[src + 5] - 5.0 * h).abs() < 1e-12);
    }

    #[test]
    fn zero_speed_blocks() {
        let dims = [5, 1, 1];
        let speed = [1.0, 1.0, 0.0, 1.0, 1.0];
        let t = march_arrival_times(&speed, dims, 1.0, &[0]);
        assert_eq!(&t[..2], &[0.0, 1.0]);
        assert!(t[2..].iter().all(|v| v.is_infinite()));
    }
}
