#![allow(dead_code)]

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use voxpack::mesh::{save_obj, TriangleMesh};
use voxpack::output::MeshSettings;
use voxpack::pipeline::{PipelineConfig, ShellConfig};
use voxpack::seeding::{Axis, SeedingConfig, SeedingMethod};
use voxpack::shapes;

/// Fraction of the decoration radius by which sphere decorations sit above
/// the seed, so each one sinks `1 - SPHERE_LIFT` radii into the base.
pub const SPHERE_LIFT: f64 = 0.6;

pub fn sphere_decoration(radius: f64) -> TriangleMesh {
    shapes::icosphere(radius, 3).translated(&Vector3::new(0.0, 0.0, SPHERE_LIFT * radius)).unwrap()
}

/// Decoration radius giving `count` seeds at `coverage` on a sphere of
/// radius `base_radius`.
pub fn radius_for_count(base_radius: f64, count: usize, coverage: f64) -> f64 {
    (coverage * 4.0 * base_radius * base_radius / count as f64).sqrt()
}

pub struct Scene {
    pub dir: PathBuf,
    pub config: PipelineConfig,
}

fn write_meshes(dir: &Path, base: &TriangleMesh, decoration: &TriangleMesh) -> (PathBuf, PathBuf) {
    let b = dir.join("base.obj");
    let d = dir.join("decoration.obj");
    save_obj(base, &b).unwrap();
    save_obj(decoration, &d).unwrap();
    (b, d)
}

fn scene(dir: &Path, base: &TriangleMesh, decoration: &TriangleMesh, seeding: SeedingConfig, resolution: usize) -> Scene {
    let (base_mesh, deco) = write_meshes(dir, base, decoration);
    Scene {
        dir: dir.to_path_buf(),
        config: PipelineConfig {
            base_mesh,
            decorations: vec![deco],
            seeding: Some(seeding),
            resolution,
            output_dir: dir.join("out"),
            mesh: MeshSettings {
                triangle_budget: Some(2000),
                ..Default::default()
            },
            ..Default::default()
        },
    }
}

/// Sphere decorations on a unit sphere, seed count set by the coverage.
pub fn sphere_scene(dir: &Path, count: usize, coverage: f64, cvt_iterations: usize, resolution: usize) -> Scene {
    let r = radius_for_count(1.0, count, 1.43);
    let seeding = SeedingConfig {
        coverage,
        cvt_iterations,
        rng_seed: 11,
        ..Default::default()
    };
    scene(dir, &shapes::icosphere(1.0, 5), &sphere_decoration(r), seeding, resolution)
}

/// Vase base with stripe-seeded spheres and four-way shell cuts about z.
pub fn vase_scene(dir: &Path, resolution: usize) -> Scene {
    let base = shapes::vase(2.0, 0.6, 96, 64);
    let seeding = SeedingConfig {
        method: SeedingMethod::Stripes,
        coverage: 1.4,
        stripe_angle: 60.0,
        guidance_axis: Axis::Z,
        rng_seed: 5,
        ..Default::default()
    };
    let mut s = scene(dir, &base, &sphere_decoration(0.12), seeding, resolution);
    s.config.shell = Some(ShellConfig {
        axis: Some(Axis::Z),
        planes: None,
    });
    s
}

pub fn write_config(scene: &Scene) -> PathBuf {
    let path = scene.dir.join("scene.toml");
    std::fs::write(&path, scene.config.to_toml().unwrap()).unwrap();
    path
}
