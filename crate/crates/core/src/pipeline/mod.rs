//! Staged pipeline driver: seed, deform, mesh and shell stages with cached
//! artifacts in an output directory.

mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deform::{deform_with_regrid, DeformReport};
use crate::error::{Error, Result};
use crate::mesh::{load_mesh, load_obj_objects, save_obj, save_obj_objects, TriangleMesh};
use crate::output::{
    axis_planes, build_element_meshes, decompose_shell, merge_scene, patch_file_name, MergeStats, ShellManifest,
};
use crate::seeding::{footprint_area, generate_seeds, read_seeds_json, write_seeds_json, SeedPlacement};
use crate::voxel::{choose_voxel_edge, voxelize_instance, BaseSlabs, DecorationInstance};

pub use config::{PipelineConfig, ShellConfig};

/// Lost-voxel percentage band the packing is tuned for.
pub const OVERLAP_ENVELOPE: (f64, f64) = (12.0, 33.0);

/// Grid enlargements allowed per deformation run.
pub const MAX_REGRIDS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Seed,
    Deform,
    Mesh,
    Shell,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Seed, Stage::Deform, Stage::Mesh, Stage::Shell];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Seed => "seed",
            Stage::Deform => "deform",
            Stage::Mesh => "mesh",
            Stage::Shell => "shell",
        }
    }

    /// Artifact directory of the stage inside the output directory.
    pub fn dir(self, out: &Path) -> PathBuf {
        out.join(match self {
            Stage::Shell => "shells",
            s => s.name(),
        })
    }

    fn downstream(self) -> impl Iterator<Item = Stage> {
        Stage::ALL.into_iter().filter(move |s| *s > self)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, PipelineError> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| PipelineError::Config(format!("unknown stage {s:?} (expected seed, deform, mesh or shell)")))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Error,
    },
}

impl PipelineError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } => 3,
        }
    }
}

trait StageContext<T> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError::Stage { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed_count: usize,
    /// Summed scaled footprint area over base area.
    pub realized_coverage: f64,
    /// Configured coverage; `None` for manual seeds.
    pub target_coverage: Option<f64>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformSummary {
    pub instance_count: usize,
    pub voxel_edge: f64,
    pub base_voxels: usize,
    pub decoration_voxels: usize,
    pub lost_voxels: usize,
    pub overlap_percentage: f64,
    pub voxelize_time: f64,
    pub resolve_time: f64,
    pub distance_time: f64,
    pub march_time: f64,
    /// Instances whose grids were enlarged during growth.
    pub regridded: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub element_triangles: Vec<usize>,
    pub element_triangle_total: usize,
    /// Enclosed volume of the element meshes.
    pub element_volume: f64,
    /// Final voxel count times the voxel volume.
    pub voxel_volume: f64,
    pub scene: MergeStats,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSummary {
    pub patch_count: usize,
    pub patch_triangles: Vec<usize>,
    pub wall_time: f64,
}

/// Per-instance volumes as reported by the deformation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceVolumes {
    pub id: usize,
    pub original: usize,
    pub lost: usize,
    pub recovered: usize,
    pub final_volume: usize,
}

/// Statistics of every stage whose artifacts are present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: Option<SeedSummary>,
    pub deform: Option<DeformSummary>,
    pub instances: Vec<InstanceVolumes>,
    pub mesh: Option<MeshSummary>,
    pub shell: Option<ShellSummary>,
}

impl RunReport {
    /// Collects the stage summaries found in `out`.
    pub fn collect(out: &Path) -> Result<Self> {
        let instances = read_optional::<DeformReport>(&Stage::Deform.dir(out).join("report.json"))?
            .map(|r| {
                r.instances
                    .iter()
                    .map(|i| InstanceVolumes {
                        id: i.id,
                        original: i.original_volume,
                        lost: i.lost_volume,
                        recovered: i.recovered_volume,
                        final_volume: i.final_volume,
                    })
                    .collect()
            })
            .unwrap_or_default();
        Ok(RunReport {
            seed: read_optional(&summary_path(out, Stage::Seed))?,
            deform: read_optional(&summary_path(out, Stage::Deform))?,
            instances,
            mesh: read_optional(&summary_path(out, Stage::Mesh))?,
            shell: read_optional(&summary_path(out, Stage::Shell))?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn seeds_path(out: &Path) -> PathBuf {
    Stage::Seed.dir(out).join("seeds.json")
}

pub fn instances_path(out: &Path) -> PathBuf {
    Stage::Deform.dir(out).join("instances.json")
}

pub fn elements_path(out: &Path) -> PathBuf {
    Stage::Mesh.dir(out).join("decorations.obj")
}

pub fn scene_path(out: &Path) -> PathBuf {
    Stage::Mesh.dir(out).join("scene.obj")
}

pub fn report_path(out: &Path) -> PathBuf {
    out.join("report.json")
}

fn summary_path(out: &Path, stage: Stage) -> PathBuf {
    stage.dir(out).join("summary.json")
}

fn element_name(id: usize) -> String {
    format!("element_{id}")
}

fn read_optional<T: DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if !path.is_file() {
        return Ok(None);
    }
    read_json(path).map(Some)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

fn write_json<T: Serialize>(value: &T, path: &Path, pretty: bool) -> Result<()> {
    let mut text = if pretty {
        serde_json::to_string_pretty(value)?
    } else {
        serde_json::to_string(value)?
    };
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn reset_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_decorations(config: &PipelineConfig) -> Result<Vec<TriangleMesh>> {
    config.decorations.iter().map(load_mesh).collect()
}

fn instance_base(config: &PipelineConfig, instances: &[DecorationInstance]) -> Result<(TriangleMesh, BaseSlabs)> {
    let base = load_mesh(&config.base_mesh)?;
    let slabs = BaseSlabs::from_mesh(&base, instances)?;
    Ok((base, slabs))
}

fn seed_stage(config: &PipelineConfig, out: &Path) -> Result<SeedSummary> {
    let t = Instant::now();
    let base = load_mesh(&config.base_mesh)?;
    let decorations = load_decorations(config)?;
    let seeding = config.effective_seeding();
    let seeds = match (&seeding, &config.seeds) {
        (Some(s), _) => generate_seeds(&base, &decorations, s)?,
        (None, Some(path)) => {
            let seeds = read_seeds_json(path)?;
            for s in &seeds {
                s.validate(decorations.len())?;
            }
            seeds
        }
        (None, None) => return Err(Error::InvalidArgument("no seeding source".into())),
    };
    let footprints = decorations.iter().map(footprint_area).collect::<Result<Vec<_>>>()?;
    let covered: f64 = seeds
        .iter()
        .map(|s| footprints[s.decoration_index].area * s.scale * s.scale)
        .sum();
    write_seeds_json(&seeds, seeds_path(out))?;
    Ok(SeedSummary {
        seed_count: seeds.len(),
        realized_coverage: covered / base.surface_area(),
        target_coverage: seeding.map(|s| s.coverage),
        wall_time: t.elapsed().as_secs_f64(),
    })
}

fn deform_stage(config: &PipelineConfig, out: &Path) -> Result<DeformSummary> {
    let t = Instant::now();
    let seeds: Vec<SeedPlacement> = read_seeds_json(seeds_path(out))?;
    let decorations = load_decorations(config)?;
    for s in &seeds {
        s.validate(decorations.len())?;
    }
    let h = choose_voxel_edge(&decorations, config.resolution)?;
    let base = load_mesh(&config.base_mesh)?;
    let instances = seeds
        .par_iter()
        .enumerate()
        .map(|(id, s)| voxelize_instance(&decorations[s.decoration_index], s, h, id))
        .collect::<Result<Vec<_>>>()?;
    let slabs = BaseSlabs::from_mesh(&base, &instances)?;
    let voxelize_time = t.elapsed().as_secs_f64();
    let (result, slabs) = deform_with_regrid(instances, slabs, &config.recovery, MAX_REGRIDS, |region, h| {
        BaseSlabs::slab_for(&base, region, h).map(Some)
    })?;
    let r = &result.report;
    let (lo, hi) = OVERLAP_ENVELOPE;
    if !(lo..=hi).contains(&r.overlap_percentage) {
        log::warn!(
            "overlap {:.1}% outside the expected {lo}-{hi}% band; consider adjusting the coverage",
            r.overlap_percentage
        );
    }
    write_json(&result.instances, &instances_path(out), false)?;
    r.write_json(Stage::Deform.dir(out).join("report.json"))?;
    Ok(DeformSummary {
        instance_count: result.instances.len(),
        voxel_edge: h,
        base_voxels: slabs.voxel_total(),
        decoration_voxels: r.decoration_voxels,
        lost_voxels: r.lost_voxels,
        overlap_percentage: r.overlap_percentage,
        voxelize_time,
        resolve_time: r.resolve_time,
        distance_time: r.distance_time,
        march_time: r.march_time,
        regridded: r.regridded.len(),
        wall_time: t.elapsed().as_secs_f64(),
    })
}

fn mesh_stage(config: &PipelineConfig, out: &Path) -> Result<MeshSummary> {
    let t = Instant::now();
    let instances: Vec<DecorationInstance> = read_json(&instances_path(out))?;
    let (base, slabs) = instance_base(config, &instances)?;
    let elements = build_element_meshes(&instances, &slabs, &config.mesh)?;
    save_obj_objects(
        instances.iter().zip(&elements).map(|(i, m)| (element_name(i.id), m)),
        elements_path(out),
    )?;
    let (scene, stats) = merge_scene(&base, &elements)?;
    save_obj(&scene, scene_path(out))?;
    let element_triangles: Vec<usize> = elements.iter().map(|m| m.triangle_count()).collect();
    let voxel_volume = instances
        .iter()
        .map(|i| i.grid.occupied_count() as f64 * i.voxel_edge().powi(3))
        .sum();
    Ok(MeshSummary {
        element_triangle_total: element_triangles.iter().sum(),
        element_triangles,
        element_volume: elements.iter().map(|m| m.volume()).sum(),
        voxel_volume,
        scene: stats,
        wall_time: t.elapsed().as_secs_f64(),
    })
}

fn shell_stage(config: &PipelineConfig, shell: &ShellConfig, out: &Path) -> Result<ShellSummary> {
    let t = Instant::now();
    let instances: Vec<DecorationInstance> = read_json(&instances_path(out))?;
    let objects = load_obj_objects(elements_path(out))?;
    if objects.len() != instances.len() {
        return Err(Error::InvalidArgument(format!(
            "{} element meshes for {} instances; rerun the mesh stage",
            objects.len(),
            instances.len()
        )));
    }
    for (inst, (name, _)) in instances.iter().zip(&objects) {
        if *name != element_name(inst.id) {
            return Err(Error::InvalidArgument(format!("element object {name} does not match instance {}", inst.id)));
        }
    }
    let elements: Vec<TriangleMesh> = objects.into_iter().map(|(_, m)| m).collect();
    let planes = match (&shell.axis, &shell.planes) {
        (_, Some(planes)) => planes.clone(),
        (Some(axis), None) => axis_planes(&load_mesh(&config.base_mesh)?, *axis).to_vec(),
        (None, None) => return Err(Error::InvalidArgument("shell needs an axis or planes".into())),
    };
    let patches = decompose_shell(&elements, &instances, &planes)?;
    let dir = Stage::Shell.dir(out);
    for p in &patches {
        save_obj(&p.mesh, dir.join(patch_file_name(p.patch_id)))?;
    }
    ShellManifest::new(&planes, &patches).write_json(dir.join("manifest.json"))?;
    Ok(ShellSummary {
        patch_count: patches.len(),
        patch_triangles: patches.iter().map(|p| p.mesh.triangle_count()).collect(),
        wall_time: t.elapsed().as_secs_f64(),
    })
}

/// Recomputes one stage in `out` from the artifacts of earlier stages and
/// deletes the artifacts of every later stage. The run report is rewritten
/// from whatever remains.
pub fn run_stage(config: &PipelineConfig, stage: Stage, out: &Path) -> Result<RunReport, PipelineError> {
    config.validate()?;
    if stage == Stage::Shell && config.shell.is_none() {
        return Err(PipelineError::Config("the shell stage needs a [shell] section".into()));
    }
    for s in stage.downstream() {
        let dir = s.dir(out);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e)).stage(stage)?;
        }
    }
    let dir = stage.dir(out);
    reset_dir(&dir).stage(stage)?;
    log::info!("running stage {stage} in {}", out.display());
    let summary = match stage {
        Stage::Seed => seed_stage(config, out).and_then(|s| write_json(&s, &summary_path(out, stage), true)),
        Stage::Deform => deform_stage(config, out).and_then(|s| write_json(&s, &summary_path(out, stage), true)),
        Stage::Mesh => mesh_stage(config, out).and_then(|s| write_json(&s, &summary_path(out, stage), true)),
        Stage::Shell => {
            let shell = config.shell.as_ref().expect("checked above");
            shell_stage(config, shell, out).and_then(|s| write_json(&s, &summary_path(out, stage), true))
        }
    };
    let written = summary.and_then(|_| write_report(out));
    // the report still reflects completed stages when this one failed
    if written.is_err() {
        let _ = write_report(out);
    }
    written.stage(stage)
}

fn write_report(out: &Path) -> Result<RunReport> {
    let report = RunReport::collect(out)?;
    write_json(&report, &report_path(out), true)?;
    Ok(report)
}

/// Runs `from` and every later stage in `out`. The shell stage runs only
/// when the config has a `[shell]` section.
pub fn run_from(config: &PipelineConfig, from: Stage, out: &Path) -> Result<RunReport, PipelineError> {
    config.validate()?;
    fs::create_dir_all(out)
        .map_err(|e| PipelineError::Config(format!("cannot create {}: {e}", out.display())))?;
    let mut report = RunReport::default();
    for stage in Stage::ALL.into_iter().filter(|s| *s >= from) {
        if stage == Stage::Shell && config.shell.is_none() {
            continue;
        }
        report = run_stage(config, stage, out)?;
    }
    Ok(report)
}

/// Full run into the configured output directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    run_from(config, Stage::Seed, &config.output_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("voxelize".parse::<Stage>().is_err());
        assert_eq!(Stage::Seed.downstream().collect::<Vec<_>>(), vec![Stage::Deform, Stage::Mesh, Stage::Shell]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Config(String::new()).exit_code(), 2);
        let e = PipelineError::Stage {
            stage: Stage::Deform,
            source: Error::Collapsed,
        };
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("deform"));
    }
}
