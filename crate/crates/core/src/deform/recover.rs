use std::cmp::Reverse;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::eikonal::{neighbors6, upwind_update, Entry, MinHeap};
use super::Schedule;
use crate::error::{Error, Result};
use crate::mesh::ScalarGrid;
use crate::voxel::{BaseSlabs, Coord, DecorationInstance, GridBox};

/// One voxel claimed by a growing front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub coord: Coord,
    pub time: f64,
    pub round: usize,
}

/// Claims and bookkeeping of one instance's growth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrowthTrace {
    pub claims: Vec<Claim>,
    pub rounds: usize,
    pub wall_time: f64,
}

impl GrowthTrace {
    pub fn mean_arrival_time(&self) -> Option<f64> {
        (!self.claims.is_empty()).then(|| self.claims.iter().map(|c| c.time).sum::<f64>() / self.claims.len() as f64)
    }
}

/// Per-instance front: tentative arrival times over the instance grid and a
/// min-heap of candidate voxels. Occupied voxels of the instance grid are the
/// accepted set (arrival 0 for the resolved shape).
struct Front {
    bounds: GridBox,
    voxel_edge: f64,
    arrival: Vec<f64>,
    speed: Vec<f64>,
    heap: MinHeap,
}

/// Instances whose (one-voxel dilated) grid boxes overlap, per instance.
pub fn neighbor_lists(instances: &[DecorationInstance]) -> Vec<Vec<usize>> {
    let boxes: Vec<GridBox> = instances.iter().map(|i| i.grid.bounds().dilated(1)).collect();
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by_key(|&i| boxes[i].min[0]);
    let mut out = vec![Vec::new(); boxes.len()];
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if boxes[j].min[0] >= boxes[i].max[0] {
                break;
            }
            if boxes[i].overlaps(&boxes[j]) {
                out[i].push(j);
                out[j].push(i);
            }
        }
    }
    out.iter_mut().for_each(|v| v.sort_unstable());
    out
}

struct Scene<'a> {
    instances: Vec<DecorationInstance>,
    neighbors: Vec<Vec<usize>>,
    base: &'a BaseSlabs,
}

impl Scene<'_> {
    /// Voxel taken by the base or by an instance other than `i`.
    fn blocked(&self, i: usize, g: &Coord) -> bool {
        self.base.is_base(i, g) || self.neighbors[i].iter().any(|&j| self.instances[j].grid.get(g))
    }

    fn solve(&self, i: usize, front: &Front, g: &Coord) -> f64 {
        let idx = self.instances[i].grid.index_of(g).expect("in grid");
        let f = front.speed[idx];
        if !(f > 0.0) {
            return f64::INFINITY;
        }
        let grid = &self.instances[i].grid;
        let mut mins = [f64::INFINITY; 3];
        for (axis, m) in mins.iter_mut().enumerate() {
            for d in [-1, 1] {
                let mut c = *g;
                c[axis] += d;
                if let Some(k) = grid.index_of(&c) {
                    if grid.occupancy()[k] {
                        *m = m.min(front.arrival[k]);
                    }
                }
            }
        }
        upwind_update(mins, front.voxel_edge / f)
    }

    /// Offers every free neighbour of `g` to the front of `i`.
    fn relax_around(&self, i: usize, front: &mut Front, g: &Coord) {
        for nb in neighbors6(*g) {
            let Some(k) = self.instances[i].grid.index_of(&nb) else {
                continue;
            };
            if self.instances[i].grid.occupancy()[k] || self.blocked(i, &nb) {
                continue;
            }
            let t = self.solve(i, front, &nb);
            if t < front.arrival[k] {
                front.arrival[k] = t;
                front.heap.push(Reverse(Entry { time: t, coord: nb }));
            }
        }
    }

    /// Drops stale or blocked entries from the top of the heap and returns the
    /// next claimable entry without removing it.
    fn peek(&self, i: usize, front: &mut Front) -> Option<Entry> {
        while let Some(&Reverse(e)) = front.heap.peek() {
            let k = self.instances[i].grid.index_of(&e.coord).expect("in grid");
            if self.instances[i].grid.occupancy()[k] || e.time != front.arrival[k] || self.blocked(i, &e.coord) {
                front.heap.pop();
                continue;
            }
            return Some(e);
        }
        None
    }

    fn claim(&mut self, i: usize, front: &mut Front, e: Entry) -> Result<()> {
        front.heap.pop();
        let b = front.bounds;
        if (0..3).any(|a| e.coord[a] == b.min[a] || e.coord[a] == b.max[a] - 1) {
            return Err(Error::GridBoundary {
                instance: self.instances[i].id,
            });
        }
        let inst = &mut self.instances[i];
        inst.grid.set(&e.coord, true);
        inst.recovered_volume += 1;
        self.relax_around(i, front, &e.coord);
        Ok(())
    }
}

/// Grows every instance with a deficit into free space until it has
/// reclaimed exactly its lost volume.
///
/// Each front starts from the free voxels adjacent to the resolved shape;
/// voxels of the base, of other instances, and voxels claimed by any front
/// are unavailable. Arrival times follow the first-order upwind solution of
/// the Eikonal equation on each instance's own velocity grid.
pub fn fast_march_recover(
    instances: Vec<DecorationInstance>,
    velocities: &[ScalarGrid],
    base: &BaseSlabs,
    schedule: Schedule,
) -> Result<(Vec<DecorationInstance>, Vec<GrowthTrace>)> {
    march(instances, velocities, base, schedule, false).map(|(i, t, _)| (i, t))
}

/// [`fast_march_recover`]; with `defer_boundary`, a front reaching its grid
/// boundary stops growing instead of failing the run, and the ids of such
/// instances are returned (the run is then incomplete).
pub(crate) fn march(
    instances: Vec<DecorationInstance>,
    velocities: &[ScalarGrid],
    base: &BaseSlabs,
    schedule: Schedule,
    defer_boundary: bool,
) -> Result<(Vec<DecorationInstance>, Vec<GrowthTrace>, Vec<usize>)> {
    if velocities.len() != instances.len() {
        return Err(Error::InvalidArgument(format!(
            "{} velocity grids for {} instances",
            velocities.len(),
            instances.len()
        )));
    }
    if base.len() != instances.len() && !base.is_empty() {
        return Err(Error::InvalidArgument("base slabs do not match the instances".into()));
    }
    for (inst, v) in instances.iter().zip(velocities) {
        if v.dims() != inst.grid.dims() {
            return Err(Error::InvalidArgument(format!(
                "velocity grid of instance {} is not co-registered with its voxel grid",
                inst.id
            )));
        }
        if inst.recovered_volume > inst.lost_volume {
            return Err(Error::InvalidArgument(format!("instance {} over-recovered", inst.id)));
        }
    }
    let empty_base = BaseSlabs::none(instances.len());
    let base = if base.is_empty() { &empty_base } else { base };
    let neighbors = neighbor_lists(&instances);
    let mut scene = Scene {
        instances,
        neighbors,
        base,
    };
    let n = scene.instances.len();
    let mut traces = vec![GrowthTrace::default(); n];
    let mut fronts: Vec<Option<Front>> = Vec::with_capacity(n);
    for i in 0..n {
        let inst = &scene.instances[i];
        if inst.deficit() == 0 {
            fronts.push(None);
            continue;
        }
        let start = Instant::now();
        let occ = inst.grid.occupancy();
        let arrival: Vec<f64> = occ.iter().map(|&o| if o { 0.0 } else { f64::INFINITY }).collect();
        let mut front = Front {
            bounds: inst.grid.bounds(),
            voxel_edge: inst.voxel_edge(),
            arrival,
            speed: velocities[i].values().to_vec(),
            heap: MinHeap::new(),
        };
        let border: Vec<Coord> = inst
            .grid
            .occupied()
            .filter(|g| neighbors6(*g).iter().any(|nb| !inst.grid.get(nb)))
            .collect();
        for g in &border {
            scene.relax_around(i, &mut front, g);
        }
        traces[i].wall_time += start.elapsed().as_secs_f64();
        fronts.push(Some(front));
    }

    let mut frozen = vec![false; n];
    let mut hits = Vec::new();
    let mut round = 0usize;
    loop {
        let active: Vec<usize> = (0..n).filter(|&i| !frozen[i] && scene.instances[i].deficit() > 0).collect();
        if active.is_empty() {
            break;
        }
        round += 1;
        match schedule {
            Schedule::RoundRobin => {
                for &i in &active {
                    let start = Instant::now();
                    let front = fronts[i].as_mut().expect("front for instance with deficit");
                    let Some(e) = scene.peek(i, front) else {
                        return Err(exhausted(&scene.instances[i]));
                    };
                    match scene.claim(i, front, e) {
                    Err(Error::GridBoundary { instance }) if defer_boundary => {
                        frozen[i] = true;
                        hits.push(instance);
                        continue;
                    }
                    r => r?,
                }
                    let t = &mut traces[i];
                    t.claims.push(Claim {
                        coord: e.coord,
                        time: e.time,
                        round,
                    });
                    t.rounds = round;
                    t.wall_time += start.elapsed().as_secs_f64();
                }
            }
            Schedule::GlobalMin => {
                let mut best: Option<(usize, Entry)> = None;
                for &i in &active {
                    let front = fronts[i].as_mut().expect("front for instance with deficit");
                    let Some(e) = scene.peek(i, front) else {
                        return Err(exhausted(&scene.instances[i]));
                    };
                    if best.is_none_or(|(_, b)| e.time < b.time) {
                        best = Some((i, e));
                    }
                }
                let (i, e) = best.expect("active instances exist");
                let start = Instant::now();
                let front = fronts[i].as_mut().expect("front");
                match scene.claim(i, front, e) {
                    Err(Error::GridBoundary { instance }) if defer_boundary => {
                        frozen[i] = true;
                        hits.push(instance);
                        continue;
                    }
                    r => r?,
                }
                let t = &mut traces[i];
                t.claims.push(Claim {
                    coord: e.coord,
                    time: e.time,
                    round,
                });
                t.rounds += 1;
                t.wall_time += start.elapsed().as_secs_f64();
            }
        }
        if round.is_multiple_of(20_000) {
            let left: usize = scene.instances.iter().map(|i| i.deficit()).sum();
            log::debug!("round {round}: {left} voxels left to recover");
        }
    }
    Ok((scene.instances, traces, hits))
}

fn exhausted(inst: &DecorationInstance) -> Error {
    Error::FrontExhausted {
        instance: inst.id,
        deficit: inst.deficit(),
    }
}
