mod common;

use std::process::Command;

fn voxpack() -> Command {
    Command::new(env!("CARGO_BIN_EXE_voxpack"))
}

#[test]
fn defaults_prints_a_loadable_config() {
    let out = voxpack().arg("defaults").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["a = 0.1", "b = 0.3", "resolution = 64", "cvt_iterations = 100", "size_jitter = 0.0"] {
        assert!(text.contains(key), "missing {key}");
    }
    voxpack::pipeline::PipelineConfig::from_toml(&text).unwrap();
    let json = voxpack().args(["defaults", "--json"]).output().unwrap();
    voxpack::pipeline::PipelineConfig::from_json(std::str::from_utf8(&json.stdout).unwrap()).unwrap();
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let status = voxpack().arg("pipeline").status().unwrap();
    assert_eq!(status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "base_mesh = 3\n").unwrap();
    let status = voxpack().args(["seed", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = voxpack().arg("no_such_command").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn staged_cli_run() {
    let dir = tempfile::tempdir().unwrap();
    let scene = common::sphere_scene(dir.path(), 30, 1.4, 10, 18);
    let config = common::write_config(&scene);
    let out = dir.path().join("run");
    let ok = voxpack()
        .args(["seed", "--threads", "1", "--seed", "3", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(report["seed"]["seed_count"].as_u64().unwrap() > 0);

    // mesh before deform is a stage error
    let status = voxpack().args(["mesh", "--config"]).arg(&config).arg("--resume").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(3));

    let status = voxpack()
        .args(["pipeline", "--stage", "deform", "--config"])
        .arg(&config)
        .arg("--resume")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("mesh/scene.obj").is_file());
    let printed = voxpack().arg("report").arg("--resume").arg(&out).output().unwrap();
    assert!(printed.status.success());
    let report: serde_json::Value = serde_json::from_slice(&printed.stdout).unwrap();
    assert!(report["mesh"]["element_triangle_total"].as_u64().unwrap() > 0);

    let status = voxpack()
        .args(["pipeline", "--stage", "bogus", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
