//! Element meshes, scene merging and shell decomposition.

mod decimate;
mod smooth;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deform::neighbor_lists;
use crate::error::{Error, Result};
use crate::mesh::{extract_isosurface, Point, ScalarGrid, TriangleMesh, Vector};
use crate::seeding::Axis;
use crate::voxel::{BaseSlabs, Coord, DecorationInstance, VoxelGrid};

pub use decimate::decimate;
pub use smooth::{smooth_mesh, TaubinParams};

/// Seeds closer than this to a cut plane cannot be assigned to a cell.
pub const PLANE_TOLERANCE: f64 = 1e-6;

/// Field value of voxels owned by another instance or the base. Placing it
/// above the empty value moves the surface off shared voxel faces, so
/// touching elements keep a gap of `2 (1 - 0.5 / FOREIGN_VALUE)` voxels.
pub const FOREIGN_VALUE: f64 = 1.25;

/// Marching-cubes surface of an instance's occupancy at level 0.5 on the
/// binary field (occupied = 0, empty = 1), padded by one empty layer.
pub fn extract_element_mesh(instance: &DecorationInstance) -> Result<TriangleMesh> {
    extract_element_mesh_with_contacts(instance, &[], None)
}

/// [`extract_element_mesh`] with voxels of `others` and `base` set to
/// [`FOREIGN_VALUE`], so the surface sits strictly inside the instance where
/// it touches them.
pub fn extract_element_mesh_with_contacts(
    instance: &DecorationInstance,
    others: &[&VoxelGrid],
    base: Option<&VoxelGrid>,
) -> Result<TriangleMesh> {
    let grid = &instance.grid;
    if grid.occupied_count() == 0 {
        return Err(Error::EmptyIsosurface {
            level: 0.5,
            min: 1.0,
            max: 1.0,
        });
    }
    let padded = grid.bounds().dilated(1);
    let pd = padded.dims();
    let h = grid.voxel_edge();
    let foreign = |g: &Coord| base.is_some_and(|b| b.get(g)) || others.iter().any(|o| o.get(g));
    let values: Vec<f64> = padded
        .coords()
        .map(|g| {
            if grid.get(&g) {
                0.0
            } else if foreign(&g) {
                FOREIGN_VALUE
            } else {
                1.0
            }
        })
        .collect();
    let origin = grid.origin() - Vector::repeat(h);
    let field = ScalarGrid::new(origin, h, pd, values)?;
    extract_isosurface(&field, 0.5)
}

/// Mesh settings for decoration elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSettings {
    pub smoothing_iterations: usize,
    pub taubin: TaubinParams,
    /// Triangle budget per element; `None` keeps every triangle.
    pub triangle_budget: Option<usize>,
}

impl Default for MeshSettings {
    fn default() -> Self {
        MeshSettings {
            smoothing_iterations: 20,
            taubin: TaubinParams::default(),
            triangle_budget: None,
        }
    }
}

/// Extracts, smooths and optionally decimates every element, in parallel.
pub fn build_element_meshes(
    instances: &[DecorationInstance],
    base: &BaseSlabs,
    settings: &MeshSettings,
) -> Result<Vec<TriangleMesh>> {
    let neighbors = neighbor_lists(instances);
    (0..instances.len())
        .into_par_iter()
        .map(|i| {
            let others: Vec<&VoxelGrid> = neighbors[i].iter().map(|&j| &instances[j].grid).collect();
            let raw = extract_element_mesh_with_contacts(&instances[i], &others, base.slab(i))?;
            let smooth = smooth_mesh(&raw, settings.smoothing_iterations, &settings.taubin)?;
            match settings.triangle_budget {
                Some(budget) => decimate(&smooth, budget),
                None => Ok(smooth),
            }
        })
        .collect()
}

/// Edge audit of a merged scene.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStats {
    pub triangles: usize,
    pub welded_vertices: usize,
    /// Edges without exactly two triangles, expected only where elements
    /// touch the base or each other.
    pub non_manifold_edges: usize,
}

/// Base plus elements in one mesh, coincident vertices welded.
pub fn merge_scene(base: &TriangleMesh, elements: &[TriangleMesh]) -> Result<(TriangleMesh, MergeStats)> {
    if elements.is_empty() {
        let audit = base.edge_audit();
        return Ok((
            base.clone(),
            MergeStats {
                triangles: base.triangle_count(),
                welded_vertices: 0,
                non_manifold_edges: audit.open_edges(),
            },
        ));
    }
    let all = TriangleMesh::concat(std::iter::once(base).chain(elements))?;
    let tolerance = 1e-9 * all.bbox().diagonal();
    let (merged, welded) = all.welded(tolerance)?;
    let audit = merged.edge_audit();
    Ok((
        merged.clone(),
        MergeStats {
            triangles: merged.triangle_count(),
            welded_vertices: welded,
            non_manifold_edges: audit.open_edges(),
        },
    ))
}

/// Oriented cut plane `normal . p = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutPlane {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl CutPlane {
    pub fn through(point: &Point, normal: &Vector) -> Result<Self> {
        let n = normal.try_normalize(1e-12).ok_or_else(|| Error::InvalidArgument("cut plane normal is zero".into()))?;
        Ok(CutPlane {
            normal: [n.x, n.y, n.z],
            offset: n.dot(&point.coords),
        })
    }

    pub fn signed_distance(&self, p: &Point) -> f64 {
        let n = Vector::from(self.normal);
        (n.dot(&p.coords) - self.offset) / n.norm()
    }
}

/// Two perpendicular planes containing the axis through the bounding-box
/// centre of `mesh`, splitting it into four quadrants.
pub fn axis_planes(mesh: &TriangleMesh, axis: Axis) -> [CutPlane; 2] {
    let c = mesh.bbox().center();
    let a = axis.index();
    let (u, v) = ((a + 1) % 3, (a + 2) % 3);
    let unit = |k: usize| {
        let mut n = [0.0; 3];
        n[k] = 1.0;
        n
    };
    [
        CutPlane {
            normal: unit(u),
            offset: c[u],
        },
        CutPlane {
            normal: unit(v),
            offset: c[v],
        },
    ]
}

/// Printable shell: whole elements whose seeds fall in one cell of the cuts.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellPatch {
    pub patch_id: usize,
    /// Bit `k` set when the cell lies on the positive side of plane `k`.
    pub cell: u64,
    pub element_ids: Vec<usize>,
    pub mesh: TriangleMesh,
}

/// Assigns each element wholly to the cell holding its seed position and
/// concatenates the members of each non-empty cell. Patches are numbered in
/// increasing cell order.
pub fn decompose_shell(
    elements: &[TriangleMesh],
    instances: &[DecorationInstance],
    planes: &[CutPlane],
) -> Result<Vec<ShellPatch>> {
    if elements.len() != instances.len() {
        return Err(Error::InvalidArgument(format!(
            "{} element meshes for {} instances",
            elements.len(),
            instances.len()
        )));
    }
    if planes.len() > 63 {
        return Err(Error::InvalidArgument("at most 63 cut planes are supported".into()));
    }
    for p in planes {
        if Vector::from(p.normal).norm() <= 1e-12 {
            return Err(Error::InvalidArgument("cut plane normal is zero".into()));
        }
    }
    let mut on_plane = Vec::new();
    let mut cells: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (k, inst) in instances.iter().enumerate() {
        let p = inst.seed.position;
        let mut key = 0u64;
        for (b, plane) in planes.iter().enumerate() {
            let d = plane.signed_distance(&p);
            if d.abs() <= PLANE_TOLERANCE {
                on_plane.push(inst.id);
                break;
            }
            if d > 0.0 {
                key |= 1 << b;
            }
        }
        cells.entry(key).or_default().push(k);
    }
    if !on_plane.is_empty() {
        on_plane.dedup();
        return Err(Error::SeedOnCutPlane { instances: on_plane });
    }
    cells
        .into_iter()
        .enumerate()
        .map(|(patch_id, (cell, members))| {
            let mesh = TriangleMesh::concat(members.iter().map(|&k| &elements[k]))?;
            Ok(ShellPatch {
                patch_id,
                cell,
                element_ids: members.iter().map(|&k| instances[k].id).collect(),
                mesh,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub patch_id: usize,
    pub cell: u64,
    pub file: String,
    pub element_ids: Vec<usize>,
    pub triangles: usize,
}

/// Patch-to-instance mapping written next to the patch meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellManifest {
    pub planes: Vec<CutPlane>,
    pub patches: Vec<ManifestEntry>,
}

impl ShellManifest {
    pub fn new(planes: &[CutPlane], patches: &[ShellPatch]) -> Self {
        ShellManifest {
            planes: planes.to_vec(),
            patches: patches
                .iter()
                .map(|p| ManifestEntry {
                    patch_id: p.patch_id,
                    cell: p.cell,
                    file: patch_file_name(p.patch_id),
                    element_ids: p.element_ids.clone(),
                    triangles: p.mesh.triangle_count(),
                })
                .collect(),
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

pub fn patch_file_name(patch_id: usize) -> String {
    format!("patch_{patch_id}.obj")
}
