//! Lattice-aligned occupancy grids for placed decorations and the base.
//!
//! Every grid shares one global lattice anchored at the world origin: lattice
//! coordinate `g` is the voxel whose centre is `(g + 0.5) * voxel_edge`. Grids
//! store an integer origin index, so Boolean queries between grids are integer
//! offsets.

mod edt;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::raycast::RAY_JITTER;
use crate::mesh::{frame_rotation, winding_number, ColumnIndex, Point, TriangleMesh, Vector};
use crate::seeding::SeedPlacement;

pub use edt::squared_distance_transform;

/// Instance grids span this multiple of the placed decoration's bounding box.
pub const GRID_FACTOR: f64 = 1.5;
pub const MIN_RESOLUTION: usize = 16;

/// Global lattice coordinate.
pub type Coord = [i64; 3];

/// Half-open box `[min, max)` of lattice coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridBox {
    pub min: Coord,
    pub max: Coord,
}

impl GridBox {
    pub fn new(min: Coord, max: Coord) -> Self {
        GridBox { min, max }
    }

    /// Smallest lattice box whose voxels cover the world-space box.
    pub fn covering(lo: &Point, hi: &Point, voxel_edge: f64) -> Self {
        GridBox {
            min: [0, 1, 2].map(|a| (lo[a] / voxel_edge).floor() as i64),
            max: [0, 1, 2].map(|a| (hi[a] / voxel_edge).ceil() as i64),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.max[a] <= self.min[a])
    }

    pub fn dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| (self.max[a] - self.min[a]).max(0) as usize)
    }

    pub fn volume(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn contains(&self, g: &Coord) -> bool {
        (0..3).all(|a| g[a] >= self.min[a] && g[a] < self.max[a])
    }

    pub fn intersection(&self, other: &GridBox) -> GridBox {
        GridBox {
            min: [0, 1, 2].map(|a| self.min[a].max(other.min[a])),
            max: [0, 1, 2].map(|a| self.max[a].min(other.max[a])),
        }
    }

    pub fn union(&self, other: &GridBox) -> GridBox {
        GridBox {
            min: [0, 1, 2].map(|a| self.min[a].min(other.min[a])),
            max: [0, 1, 2].map(|a| self.max[a].max(other.max[a])),
        }
    }

    pub fn dilated(&self, by: i64) -> GridBox {
        GridBox {
            min: self.min.map(|v| v - by),
            max: self.max.map(|v| v + by),
        }
    }

    pub fn overlaps(&self, other: &GridBox) -> bool {
        !self.intersection(other).is_empty()
    }

    /// Coordinates in z-major, then y, then x order.
    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        let b = *self;
        (b.min[2]..b.max[2].max(b.min[2])).flat_map(move |z| {
            (b.min[1]..b.max[1].max(b.min[1]))
                .flat_map(move |y| (b.min[0]..b.max[0].max(b.min[0])).map(move |x| [x, y, z]))
        })
    }
}

/// Centre of lattice voxel `g`.
pub fn voxel_center(g: &Coord, voxel_edge: f64) -> Point {
    Point::new(
        (g[0] as f64 + 0.5) * voxel_edge,
        (g[1] as f64 + 0.5) * voxel_edge,
        (g[2] as f64 + 0.5) * voxel_edge,
    )
}

/// Dense occupancy over a lattice box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GridRecord", try_from = "GridRecord")]
pub struct VoxelGrid {
    bounds: GridBox,
    voxel_edge: f64,
    occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn empty(bounds: GridBox, voxel_edge: f64) -> Self {
        VoxelGrid {
            bounds,
            voxel_edge,
            occupancy: vec![false; bounds.volume()],
        }
    }

    pub fn from_occupancy(bounds: GridBox, voxel_edge: f64, occupancy: Vec<bool>) -> Result<Self> {
        if occupancy.len() != bounds.volume() {
            return Err(Error::InvalidArgument(format!(
                "{} occupancy values for a box of {} voxels",
                occupancy.len(),
                bounds.volume()
            )));
        }
        if !(voxel_edge > 0.0) {
            return Err(Error::InvalidArgument(format!("voxel edge must be positive, got {voxel_edge}")));
        }
        Ok(VoxelGrid {
            bounds,
            voxel_edge,
            occupancy,
        })
    }

    /// Same occupancy on another box; occupied voxels outside it are an error.
    pub fn reboxed(&self, bounds: GridBox) -> Result<Self> {
        let mut out = VoxelGrid::empty(bounds, self.voxel_edge);
        for g in self.occupied() {
            if !out.set(&g, true) {
                return Err(Error::InvalidArgument(format!("occupied voxel {g:?} lies outside the new box")));
            }
        }
        Ok(out)
    }

    pub fn bounds(&self) -> GridBox {
        self.bounds
    }

    pub fn dims(&self) -> [usize; 3] {
        self.bounds.dims()
    }

    pub fn voxel_edge(&self) -> f64 {
        self.voxel_edge
    }

    pub fn origin_index(&self) -> Coord {
        self.bounds.min
    }

    /// World position of the grid's minimum corner.
    pub fn origin(&self) -> Point {
        let o = self.bounds.min;
        Point::new(
            o[0] as f64 * self.voxel_edge,
            o[1] as f64 * self.voxel_edge,
            o[2] as f64 * self.voxel_edge,
        )
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    /// Index into the occupancy array, or `None` outside the box.
    #[inline]
    pub fn index_of(&self, g: &Coord) -> Option<usize> {
        if !self.bounds.contains(g) {
            return None;
        }
        let d = self.bounds.dims();
        let l = [0, 1, 2].map(|a| (g[a] - self.bounds.min[a]) as usize);
        Some(l[0] + d[0] * (l[1] + d[1] * l[2]))
    }

    #[inline]
    pub fn coord_of(&self, index: usize) -> Coord {
        let d = self.bounds.dims();
        let (i, rest) = (index % d[0], index / d[0]);
        let (j, k) = (rest % d[1], rest / d[1]);
        [
            self.bounds.min[0] + i as i64,
            self.bounds.min[1] + j as i64,
            self.bounds.min[2] + k as i64,
        ]
    }

    /// Occupancy at a global coordinate; false outside the box.
    #[inline]
    pub fn get(&self, g: &Coord) -> bool {
        self.index_of(g).is_some_and(|i| self.occupancy[i])
    }

    /// Sets a voxel inside the box; returns false (and does nothing) outside.
    pub fn set(&mut self, g: &Coord, value: bool) -> bool {
        match self.index_of(g) {
            Some(i) => {
                self.occupancy[i] = value;
                true
            }
            None => false,
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    pub fn occupied(&self) -> impl Iterator<Item = Coord> + '_ {
        self.occupancy
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| self.coord_of(i))
    }

    /// Tight lattice box around the occupied voxels (empty box if none).
    pub fn occupied_bounds(&self) -> GridBox {
        let mut b = GridBox::new([i64::MAX; 3], [i64::MIN; 3]);
        for g in self.occupied() {
            for a in 0..3 {
                b.min[a] = b.min[a].min(g[a]);
                b.max[a] = b.max[a].max(g[a] + 1);
            }
        }
        if b.min[0] == i64::MAX {
            GridBox::new([0; 3], [0; 3])
        } else {
            b
        }
    }

    /// Sum of doubled centres `2 g + 1` over occupied voxels and their count.
    pub fn doubled_center_sum(&self) -> ([i64; 3], usize) {
        let mut sum = [0i64; 3];
        let mut n = 0usize;
        for g in self.occupied() {
            for a in 0..3 {
                sum[a] += 2 * g[a] + 1;
            }
            n += 1;
        }
        (sum, n)
    }

    /// Mean centre of occupied voxels.
    pub fn centroid(&self) -> Option<Point> {
        let (sum, n) = self.doubled_center_sum();
        (n > 0).then(|| {
            let f = self.voxel_edge / (2 * n) as f64;
            Point::new(sum[0] as f64 * f, sum[1] as f64 * f, sum[2] as f64 * f)
        })
    }

    pub fn check_lattice(&self, other: &VoxelGrid) -> Result<()> {
        same_lattice(self.voxel_edge, other.voxel_edge)
    }

    /// Legacy-VTK structured points dump (ASCII), one sample per voxel centre.
    pub fn write_vtk(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let d = self.dims();
        let o = voxel_center(&self.bounds.min, self.voxel_edge);
        let h = self.voxel_edge;
        let mut s = String::new();
        s.push_str("# vtk DataFile Version 3.0\nvoxpack occupancy\nASCII\nDATASET STRUCTURED_POINTS\n");
        let _ = writeln!(s, "DIMENSIONS {} {} {}", d[0], d[1], d[2]);
        let _ = writeln!(s, "ORIGIN {} {} {}", o.x, o.y, o.z);
        let _ = writeln!(s, "SPACING {h} {h} {h}");
        let _ = writeln!(s, "POINT_DATA {}", self.len());
        s.push_str("SCALARS occupancy unsigned_char 1\nLOOKUP_TABLE default\n");
        for row in self.occupancy.chunks(d[0].max(1)) {
            let line: Vec<&str> = row.iter().map(|&o| if o { "1" } else { "0" }).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn same_lattice(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        Err(Error::LatticeMismatch { a, b })
    } else {
        Ok(())
    }
}

/// Run-length encoded grid for JSON artifacts: `runs` alternates empty and
/// occupied run lengths, starting with empty.
#[derive(Serialize, Deserialize)]
struct GridRecord {
    origin_index: Coord,
    dims: [usize; 3],
    voxel_edge: f64,
    runs: Vec<usize>,
}

impl From<VoxelGrid> for GridRecord {
    fn from(g: VoxelGrid) -> Self {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0usize;
        for &o in &g.occupancy {
            if o == current {
                len += 1;
            } else {
                runs.push(len);
                current = o;
                len = 1;
            }
        }
        runs.push(len);
        GridRecord {
            origin_index: g.bounds.min,
            dims: g.dims(),
            voxel_edge: g.voxel_edge,
            runs,
        }
    }
}

impl TryFrom<GridRecord> for VoxelGrid {
    type Error = String;

    fn try_from(r: GridRecord) -> std::result::Result<Self, String> {
        let bounds = GridBox::new(r.origin_index, [0, 1, 2].map(|a| r.origin_index[a] + r.dims[a] as i64));
        let mut occupancy = Vec::with_capacity(bounds.volume());
        let mut value = false;
        for &len in &r.runs {
            occupancy.extend(std::iter::repeat_n(value, len));
            value = !value;
        }
        VoxelGrid::from_occupancy(bounds, r.voxel_edge, occupancy).map_err(|e| e.to_string())
    }
}

/// One placed decoration and its volume bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorationInstance {
    pub id: usize,
    pub grid: VoxelGrid,
    /// Centre of the voxels occupied at placement.
    pub centroid: Point,
    /// Sum of doubled voxel centres `2 g + 1` at placement; with
    /// `original_volume` it gives the centroid exactly in lattice units.
    pub centroid_sum: [i64; 3],
    /// Bounding-box diagonal of the placed decoration mesh.
    pub diagonal: f64,
    /// Voxel count at placement.
    pub original_volume: usize,
    pub lost_volume: usize,
    pub recovered_volume: usize,
    pub seed: SeedPlacement,
}

impl DecorationInstance {
    /// Deficit still to be reclaimed by growth.
    pub fn deficit(&self) -> usize {
        self.lost_volume - self.recovered_volume
    }

    pub fn voxel_edge(&self) -> f64 {
        self.grid.voxel_edge()
    }
}

/// Voxel edge from the smallest decoration bounding-box diagonal.
pub fn choose_voxel_edge(decorations: &[TriangleMesh], resolution: usize) -> Result<f64> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InsufficientResolution {
            requested: resolution,
            limit: MIN_RESOLUTION,
        });
    }
    let diag = decorations
        .iter()
        .map(|d| d.bbox().diagonal())
        .fold(f64::INFINITY, f64::min);
    if !diag.is_finite() || diag <= 0.0 {
        return Err(Error::InvalidArgument("at least one non-degenerate decoration is required".into()));
    }
    Ok(diag / resolution as f64)
}

/// The decoration mesh transformed by the seed: scaled, then rotated so local
/// `+z` maps to the normal and `+x` to the tangent, then moved to the position.
pub fn place_decoration(decoration: &TriangleMesh, seed: &SeedPlacement) -> Result<TriangleMesh> {
    let r = frame_rotation(&seed.normal, &seed.tangent);
    decoration.transformed(&r, seed.scale, &seed.position.coords)
}

/// Inside flags for every voxel centre of `bounds` against a closed mesh.
///
/// Each lattice column is classified by crossing parity of one vertical ray
/// through the column's (jittered) centre, so the result for a voxel depends
/// only on its global coordinate, never on the box it is evaluated in.
pub fn rasterize(mesh: &TriangleMesh, bounds: &GridBox, voxel_edge: f64) -> Vec<bool> {
    let d = bounds.dims();
    if bounds.is_empty() {
        return Vec::new();
    }
    let h = voxel_edge;
    let index = ColumnIndex::new(mesh);
    let columns: Vec<Vec<bool>> = (0..d[0] * d[1])
        .into_par_iter()
        .map(|c| {
            let gx = bounds.min[0] + (c % d[0]) as i64;
            let gy = bounds.min[1] + (c / d[0]) as i64;
            let x = (gx as f64 + 0.5 + RAY_JITTER[0]) * h;
            let y = (gy as f64 + 0.5 + RAY_JITTER[1]) * h;
            let mut hits = Vec::new();
            index.hits(x, y, &mut hits);
            let mut col = vec![false; d[2]];
            if hits.is_empty() {
                return col;
            }
            let parity_ok = hits.len() % 2 == 0;
            let mut next = 0usize;
            for (k, flag) in col.iter_mut().enumerate() {
                let z = ((bounds.min[2] + k as i64) as f64 + 0.5) * h;
                if parity_ok {
                    while next < hits.len() && hits[next] <= z {
                        next += 1;
                    }
                    *flag = next % 2 == 1;
                } else {
                    let p = Point::new((gx as f64 + 0.5) * h, (gy as f64 + 0.5) * h, z);
                    *flag = winding_number(mesh, &p) > 0.5;
                }
            }
            col
        })
        .collect();
    let mut occupancy = vec![false; bounds.volume()];
    for (c, col) in columns.into_iter().enumerate() {
        for (k, v) in col.into_iter().enumerate() {
            occupancy[c + d[0] * d[1] * k] = v;
        }
    }
    occupancy
}

/// Voxelizes a placed decoration into its own grid spanning 1.5 times the
/// placed bounding box per axis.
pub fn voxelize_instance(
    decoration: &TriangleMesh,
    seed: &SeedPlacement,
    voxel_edge: f64,
    id: usize,
) -> Result<DecorationInstance> {
    voxelize_instance_with_factor(decoration, seed, voxel_edge, id, GRID_FACTOR)
}

/// [`voxelize_instance`] with an explicit grid factor (at least 1).
pub fn voxelize_instance_with_factor(
    decoration: &TriangleMesh,
    seed: &SeedPlacement,
    voxel_edge: f64,
    id: usize,
    grid_factor: f64,
) -> Result<DecorationInstance> {
    if !(voxel_edge > 0.0) {
        return Err(Error::InvalidArgument(format!("voxel edge must be positive, got {voxel_edge}")));
    }
    if !(grid_factor >= 1.0) {
        return Err(Error::InvalidArgument(format!("grid factor must be at least 1, got {grid_factor}")));
    }
    decoration.require_watertight()?;
    let placed = place_decoration(decoration, seed)?;
    let bb = placed.bbox();
    let half: Vector = bb.extent() * (0.5 * grid_factor);
    let c = bb.center();
    let bounds = GridBox::covering(&(c - half), &(c + half), voxel_edge);
    let occupancy = rasterize(&placed, &bounds, voxel_edge);
    let grid = VoxelGrid::from_occupancy(bounds, voxel_edge, occupancy)?;
    let (centroid_sum, n) = grid.doubled_center_sum();
    if n == 0 {
        return Err(Error::EmptyVoxelization { voxel_edge });
    }
    let centroid = grid.centroid().expect("non-empty");
    Ok(DecorationInstance {
        id,
        grid,
        centroid,
        centroid_sum,
        diagonal: bb.diagonal(),
        original_volume: n,
        lost_volume: 0,
        recovered_volume: 0,
        seed: seed.clone(),
    })
}

/// Global coordinates occupied in both grids, in z, y, x order.
pub fn overlap_voxels(a: &DecorationInstance, b: &DecorationInstance) -> Result<Vec<Coord>> {
    grid_overlap(&a.grid, &b.grid)
}

pub fn grid_overlap(a: &VoxelGrid, b: &VoxelGrid) -> Result<Vec<Coord>> {
    a.check_lattice(b)?;
    let common = a.bounds().intersection(&b.bounds());
    if common.is_empty() {
        return Ok(Vec::new());
    }
    Ok(common.coords().filter(|g| a.get(g) && b.get(g)).collect())
}

/// Base occupancy restricted to `region`.
pub fn voxelize_base(base: &TriangleMesh, region: &GridBox, voxel_edge: f64) -> Result<VoxelGrid> {
    base.require_watertight()?;
    VoxelGrid::from_occupancy(*region, voxel_edge, rasterize(base, region, voxel_edge))
}

/// Base solid evaluated lazily per instance: one slab per instance covering
/// its grid dilated by two voxels. A voxel's value is the same in every slab
/// that contains it.
#[derive(Debug, Clone, Default)]
pub struct BaseSlabs {
    slabs: Vec<Option<VoxelGrid>>,
}

impl BaseSlabs {
    /// Scene without a base solid.
    pub fn none(count: usize) -> Self {
        BaseSlabs {
            slabs: vec![None; count],
        }
    }

    pub fn from_mesh(base: &TriangleMesh, instances: &[DecorationInstance]) -> Result<Self> {
        base.require_watertight()?;
        let slabs = instances
            .iter()
            .map(|inst| {
                let region = inst.grid.bounds().dilated(2);
                let h = inst.voxel_edge();
                VoxelGrid::from_occupancy(region, h, rasterize(base, &region, h)).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BaseSlabs { slabs })
    }

    /// Base slab over an arbitrary region.
    pub fn slab_for(base: &TriangleMesh, region: &GridBox, voxel_edge: f64) -> Result<VoxelGrid> {
        VoxelGrid::from_occupancy(*region, voxel_edge, rasterize(base, region, voxel_edge))
    }

    pub fn set_slab(&mut self, instance: usize, slab: Option<VoxelGrid>) {
        self.slabs[instance] = slab;
    }

    pub fn from_grids(slabs: Vec<Option<VoxelGrid>>) -> Self {
        BaseSlabs { slabs }
    }

    pub fn len(&self) -> usize {
        self.slabs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slabs.is_empty()
    }

    pub fn slab(&self, instance: usize) -> Option<&VoxelGrid> {
        self.slabs.get(instance).and_then(|s| s.as_ref())
    }

    /// Base occupancy at `g`, looked up in the slab of `instance`.
    #[inline]
    pub fn is_base(&self, instance: usize, g: &Coord) -> bool {
        self.slab(instance).is_some_and(|s| s.get(g))
    }

    /// Total base voxels across slabs (slabs may overlap).
    pub fn voxel_total(&self) -> usize {
        self.slabs.iter().flatten().map(|s| s.occupied_count()).sum()
    }
}
