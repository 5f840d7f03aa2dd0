use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use membrane_cli::Manifest;
use serde_json::Value;

fn membrane(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_membrane")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn coarse_config(dir: &Path) -> String {
    let p = dir.join("coarse.json");
    fs::write(&p, r#"{"mesh_edge_length": 0.01}"#).unwrap();
    p.to_str().unwrap().to_string()
}

fn error_json(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON on stderr: {stderr}"));
    serde_json::from_str(line).unwrap()
}

#[test]
fn shape_writes_a_stable_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = coarse_config(tmp.path());
    let mut manifests = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = membrane(&["--config", &cfg, "--out", out.to_str().unwrap(), "shape", "--pattern", "pyramid", "--pressure", "3100"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let m = Manifest::read(&out).unwrap();
        assert!(m.verify(&out).is_empty());
        manifests.push(m);
    }
    assert_eq!(manifests[0], manifests[1]);
    let paths: Vec<&str> = manifests[0].files.iter().map(|e| e.path.as_str()).collect();
    assert_eq!(paths, ["apex.json", "shape.json", "shape.ply"]);
    let apex: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("a/apex.json")).unwrap()).unwrap();
    let mm = apex["apex_mm"].as_f64().unwrap();
    assert!(mm > 50.0 && mm < 110.0, "{mm}");
    assert!(fs::read_to_string(tmp.path().join("a/shape.ply")).unwrap().starts_with("ply"));
}

#[test]
fn shape_accepts_clutch_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = coarse_config(tmp.path());
    let out = tmp.path().join("o");
    let o = membrane(&["--config", &cfg, "--out", out.to_str().unwrap(), "shape", "--pattern", "inboard,outboard_e", "--pressure", "1000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let apex: Value = serde_json::from_str(&fs::read_to_string(out.join("apex.json")).unwrap()).unwrap();
    assert_eq!(apex["active"], serde_json::json!(["inboard", "outboard_e"]));
}

#[test]
fn compare_of_identical_clouds_has_zero_rmse() {
    let tmp = tempfile::tempdir().unwrap();
    let cloud = tmp.path().join("c.csv");
    let mut text = String::from("x,y,z\n");
    for i in 0..200 {
        let a = i as f64 * 0.37;
        text += &format!("{},{},{}\n", 0.05 * a.cos() * (i as f64 / 200.0), 0.05 * a.sin(), 0.01 * (i % 7) as f64);
    }
    fs::write(&cloud, text).unwrap();
    let out = tmp.path().join("o");
    let c = cloud.to_str().unwrap();
    let o = membrane(&["--out", out.to_str().unwrap(), "compare", "--measured", c, "--simulated", c]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("compare.json")).unwrap()).unwrap();
    assert_eq!(report["rmse_unaligned_m"], 0.0);
    assert!(report["rmse_m"].as_f64().unwrap() < 1e-12);
    assert_eq!(Manifest::read(&out).unwrap().kind, "compare-clouds");
}

#[test]
fn missing_input_file_exits_2_with_error_json() {
    let tmp = tempfile::tempdir().unwrap();
    let o = membrane(&["--design", "/no/such/design.json", "--out", tmp.path().to_str().unwrap(), "shape", "--pattern", "round"]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["error"]["kind"], "invalid_input");
    assert_eq!(e["error"]["code"], 2);
    assert!(e["error"]["message"].as_str().unwrap().contains("/no/such/design.json"));

    let o = membrane(&["--out", tmp.path().to_str().unwrap(), "compare", "--measured", "/nope.ply", "--simulated", "/nope.ply"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_2() {
    let o = membrane(&["shape", "--pattern", "hexagon"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "invalid_input");
    let o = membrane(&["shape", "--pattern", "round", "--pressure", "-5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(membrane(&["--help"]).status.success());
}

#[test]
fn solver_failure_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tight.json");
    fs::write(&cfg, r#"{"mesh_edge_length": 0.01, "max_iterations": 20}"#).unwrap();
    let o = membrane(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap(), "shape", "--pattern", "round"]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_json(&o);
    assert_eq!(e["error"]["kind"], "runtime");
    assert!(e["error"]["message"].as_str().unwrap().contains("no equilibrium"));
}

#[test]
fn launch_manifests_depend_only_on_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = coarse_config(tmp.path());
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        let o = membrane(&[
            "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed,
            "launch", "--directions", "up", "--trials", "3", "--marker-noise", "1e-5",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (Manifest::read(&out).unwrap(), out)
    };
    let (a, out) = run("a", "7");
    let (b, _) = run("b", "7");
    let (c, _) = run("c", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.seed, 7);
    assert!(a.files.iter().any(|e| e.path == "trajectories/up_03.csv"));
    let table = fs::read_to_string(out.join("forces.txt")).unwrap();
    let header: Vec<&str> = table.lines().next().unwrap().split("  ").map(str::trim).filter(|c| !c.is_empty()).collect();
    assert_eq!(header, ["DoF", "Direction", "Force N", "Std N", "Consistency %"]);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("forces.json")).unwrap()).unwrap();
    assert_eq!(report["dofs"][0]["trials"].as_array().unwrap().len(), 3);
}

#[test]
fn scenario_files_run_workspace_and_mode2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = coarse_config(tmp.path());
    let ws = tmp.path().join("ws.json");
    fs::write(
        &ws,
        serde_json::json!({ "kind": "workspace", "directions": ["up", "right"], "config": cfg, "out": tmp.path().join("ws") }).to_string(),
    )
    .unwrap();
    let o = membrane(&["run", ws.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let result: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("ws/workspace.json")).unwrap()).unwrap();
    assert!(result["entries"]["right"]["lateral"].as_f64().unwrap() > 3e-3);

    let out = tmp.path().join("m2");
    let o = membrane(&["--config", &cfg, "--out", out.to_str().unwrap(), "mode2", "--steps", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m2: Value = serde_json::from_str(&fs::read_to_string(out.join("mode2.json")).unwrap()).unwrap();
    assert!(m2["final_roll_deg"].as_f64().unwrap() > 1.0);
    assert!(m2["release"]["overshoots"].as_u64().unwrap() >= 1);
    let paths: Vec<String> = Manifest::read(&out).unwrap().files.into_iter().map(|e| e.path).collect();
    assert_eq!(paths, ["mode2.json", "release.csv", "tilt.csv", "tilt.json", "tilt.ply"]);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"kind": "teleport", "out": "x"}"#).unwrap();
    assert_eq!(membrane(&["run", bad.to_str().unwrap()]).status.code(), Some(2));
}
