mod common;

use std::fs;
use std::path::Path;

use voxpack::deform::RecoveryParams;
use voxpack::mesh::load_obj_objects;
use voxpack::pipeline::*;
use voxpack::seeding::{read_seeds_json, write_seeds_json};
use voxpack::voxel::DecorationInstance;

fn small_scene(dir: &Path) -> common::Scene {
    common::sphere_scene(dir, 40, 1.4, 20, 20)
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    fs::read(path).unwrap()
}

#[test]
fn full_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_scene(dir.path());
    let out = scene.config.output_dir.clone();
    let report = run_pipeline(&scene.config).unwrap();
    for p in [
        seeds_path(&out),
        instances_path(&out),
        out.join("deform/report.json"),
        elements_path(&out),
        scene_path(&out),
        report_path(&out),
    ] {
        assert!(p.is_file(), "{} missing", p.display());
    }
    let seed = report.seed.unwrap();
    assert_eq!(seed.seed_count, report.instances.len());
    assert!((seed.realized_coverage - 1.4).abs() < 0.15, "coverage {}", seed.realized_coverage);
    for i in &report.instances {
        assert_eq!(i.final_volume, i.original);
        assert_eq!(i.recovered, i.lost);
    }
    let mesh = report.mesh.unwrap();
    assert_eq!(mesh.element_triangles.len(), seed.seed_count);
    assert!(mesh.element_triangles.iter().all(|&t| t <= 2000));
    let objects = load_obj_objects(elements_path(&out)).unwrap();
    assert_eq!(objects.len(), seed.seed_count);
    assert!(objects.iter().all(|(_, m)| m.is_watertight()));
    let back = RunReport::collect(&out).unwrap();
    assert_eq!(back.instances, report.instances);
    assert!(report.shell.is_none());
}

#[test]
fn rerunning_deform_keeps_seeds_and_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut scene = small_scene(dir.path());
    let out = scene.config.output_dir.clone();
    run_pipeline(&scene.config).unwrap();
    let seeds = read(seeds_path(&out));
    let instances = read(instances_path(&out));
    scene.config.recovery = RecoveryParams::new(0.05, 0.15).unwrap();
    run_stage(&scene.config, Stage::Deform, &out).unwrap();
    assert_eq!(read(seeds_path(&out)), seeds);
    assert_ne!(read(instances_path(&out)), instances);
    // downstream artifacts are invalidated
    assert!(!Stage::Mesh.dir(&out).exists());
    let report: RunReport = serde_json::from_slice(&read(report_path(&out))).unwrap();
    assert!(report.mesh.is_none());
    assert!(report.deform.is_some());
    run_from(&scene.config, Stage::Mesh, &out).unwrap();
    assert!(elements_path(&out).is_file());
}

#[test]
fn reseeding_invalidates_everything_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_scene(dir.path());
    let out = scene.config.output_dir.clone();
    run_pipeline(&scene.config).unwrap();
    run_stage(&scene.config, Stage::Seed, &out).unwrap();
    assert!(seeds_path(&out).is_file());
    assert!(!Stage::Deform.dir(&out).exists());
    assert!(!Stage::Mesh.dir(&out).exists());
    let err = run_stage(&scene.config, Stage::Mesh, &out).unwrap_err();
    assert!(matches!(err, PipelineError::Stage { stage: Stage::Mesh, .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
    // failure leaves the seed artifacts in place
    assert!(seeds_path(&out).is_file());
}

#[test]
fn identical_configs_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = small_scene(a.path());
    let sb = small_scene(b.path());
    run_pipeline(&sa.config).unwrap();
    run_pipeline(&sb.config).unwrap();
    let (oa, ob) = (&sa.config.output_dir, &sb.config.output_dir);
    assert_eq!(read(seeds_path(oa)), read(seeds_path(ob)));
    assert_eq!(read(instances_path(oa)), read(instances_path(ob)));
    assert_eq!(read(elements_path(oa)), read(elements_path(ob)));
    assert_eq!(read(scene_path(oa)), read(scene_path(ob)));
}

#[test]
fn rng_seed_override_changes_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut scene = small_scene(dir.path());
    let out = scene.config.output_dir.clone();
    run_stage(&scene.config, Stage::Seed, &out).unwrap();
    let first = read(seeds_path(&out));
    scene.config.rng_seed = Some(99);
    run_stage(&scene.config, Stage::Seed, &out).unwrap();
    assert_ne!(read(seeds_path(&out)), first);
}

#[test]
fn manual_seed_file_gives_one_instance_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut scene = small_scene(dir.path());
    let out = scene.config.output_dir.clone();
    run_stage(&scene.config, Stage::Seed, &out).unwrap();
    let seeds = read_seeds_json(seeds_path(&out)).unwrap();
    let manual = dir.path().join("manual.json");
    write_seeds_json(&seeds[..7], &manual).unwrap();
    scene.config.seeding = None;
    scene.config.seeds = Some(manual);
    let report = run_from(&scene.config, Stage::Seed, &out).unwrap();
    assert_eq!(report.seed.unwrap().seed_count, 7);
    assert_eq!(report.instances.len(), 7);
    let instances: Vec<DecorationInstance> = serde_json::from_slice(&read(instances_path(&out))).unwrap();
    assert_eq!(instances.len(), 7);
    assert!(instances.iter().all(|i| i.grid.occupied_count() == i.original_volume));
}

#[test]
fn shell_stage_uses_the_element_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut scene = small_scene(dir.path());
    scene.config.shell = Some(ShellConfig {
        axis: Some(voxpack::seeding::Axis::Z),
        planes: None,
    });
    let out = scene.config.output_dir.clone();
    let report = run_pipeline(&scene.config).unwrap();
    let shell = report.shell.unwrap();
    assert_eq!(shell.patch_count, 4);
    let manifest: serde_json::Value = serde_json::from_slice(&read(Stage::Shell.dir(&out).join("manifest.json"))).unwrap();
    let mut ids: Vec<u64> = manifest["patches"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|p| p["element_ids"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()))
        .collect();
    ids.sort_unstable();
    assert_eq!(ids, (0..report.instances.len() as u64).collect::<Vec<_>>());
    for k in 0..4 {
        assert!(Stage::Shell.dir(&out).join(format!("patch_{k}.obj")).is_file());
    }
}

#[test]
fn invalid_configs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut scene = small_scene(dir.path());
    scene.config.decorations.clear();
    assert!(matches!(run_pipeline(&scene.config), Err(PipelineError::Config(_))));
    let mut scene = small_scene(dir.path());
    scene.config.base_mesh = dir.path().join("missing.obj");
    assert_eq!(run_pipeline(&scene.config).unwrap_err().exit_code(), 2);
    let scene = small_scene(dir.path());
    assert!(matches!(run_stage(&scene.config, Stage::Shell, &scene.config.output_dir), Err(PipelineError::Config(_))));
}
