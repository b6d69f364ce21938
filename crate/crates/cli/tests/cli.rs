use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hdx-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn hdx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdx")).current_dir(dir).args(args).env_remove("HDX_SIZE_CAP").output().unwrap()
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn build_then_spectrum() {
    let dir = scratch("spectrum");
    let b = report(&hdx(&dir, &["build", "--complete", "9", "5", "-o", "k9.json"]));
    assert_eq!(b["result"]["level_sizes"][1], 36);
    let s = report(&hdx(&dir, &["spectrum", "k9.json", "--walk", "complement", "--l1", "0", "--l2", "0", "--export-operator", "op.csv"]));
    let lam = s["result"]["lambda"].as_f64().unwrap();
    assert!((lam - 1.0 / 8.0).abs() < 1e-9, "{lam}");
    let hash = &s["manifest"]["input_hashes"]["k9.json"];
    assert_eq!(hash.as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(dir.join("op.csv")).unwrap();
    assert!(csv.starts_with("row_face,col_face,prob\n"));
    assert_eq!(csv.lines().count(), 1 + 9 * 8);
}

#[test]
fn verify_all_passes_on_the_octahedron() {
    let dir = scratch("verify");
    report(&hdx(&dir, &["build", "--partite", "2,2,2", "-o", "oct.json"]));
    let v = report(&hdx(&dir, &["verify", "oct.json", "--all"]));
    assert_eq!(v["result"]["failed"], 0);
    let checks: Vec<&str> = v["result"]["rows"].as_array().unwrap().iter().map(|r| r["check"].as_str().unwrap()).collect();
    for name in ["complement", "containment", "colored", "trickling"] {
        assert!(checks.contains(&name), "{name} missing from {checks:?}");
    }
}

#[test]
fn decode_reports_are_byte_identical() {
    let dir = scratch("decode");
    report(&hdx(&dir, &["build", "--complete", "9", "5", "-o", "k9.json"]));
    let args = ["decode", "--complex", "k9.json", "--l", "1", "--plant-seed", "7", "--alpha", "0.05"];
    let a = hdx(&dir, &args);
    let b = hdx(&dir, &args);
    assert_eq!(a.stdout, b.stdout);
    let r = report(&a);
    assert_eq!(r["result"]["recovered_plant"], true);
    assert_eq!(r["manifest"]["seed"], 7);
    assert!(r["manifest"].get("wall_time_s").is_none());
}

#[test]
fn agree_run_exact_and_monte_carlo() {
    let dir = scratch("agree");
    report(&hdx(&dir, &["build", "--complete", "9", "5", "-o", "k9.json"]));
    let base = ["agree-run", "--complex", "k9.json", "--l", "1", "--plant-seed", "2"];
    let perfect = report(&hdx(&dir, &base));
    assert_eq!(perfect["result"]["rejection"]["epsilon"], 0.0);
    let missing = hdx(&dir, &[&base[..], &["--mode", "mc"]].concat());
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--seed"));
    let mc = report(&hdx(&dir, &[&base[..], &["--mode", "mc", "--seed", "4", "--samples", "2000", "--alpha", "0.2"]].concat()));
    assert_eq!(mc["manifest"]["seed"], 4);
    assert!(mc["result"]["rejection"]["epsilon"].as_f64().unwrap() > 0.0);
}

#[test]
fn invalid_complex_is_rejected_with_the_invariant() {
    let dir = scratch("invalid");
    let bad = r#"{"n_vertices":3,"d":1,"coloring":null,"top_faces":[{"verts":[0,1],"weight":-1},{"verts":[1,2],"weight":1}]}"#;
    std::fs::write(dir.join("bad.json"), bad).unwrap();
    let out = hdx(&dir, &["spectrum", "bad.json", "--walk", "up", "--k", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-positive weight"));
    assert!(out.stdout.is_empty());
}

#[test]
fn size_cap_exits_with_two() {
    let dir = scratch("cap");
    report(&hdx(&dir, &["build", "--complete", "9", "5", "-o", "k9.json"]));
    let out = Command::new(env!("CARGO_BIN_EXE_hdx"))
        .current_dir(&dir)
        .args(["spectrum", "k9.json", "--walk", "up", "--k", "2"])
        .env("HDX_SIZE_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("size cap"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = scratch("usage");
    assert_eq!(hdx(&dir, &["spectrum"]).status.code(), Some(1));
    assert_eq!(hdx(&dir, &["build", "-o", "x.json"]).status.code(), Some(1));
    assert_eq!(hdx(&dir, &["--help"]).status.code(), Some(0));
}

#[test]
fn csv_reports_flatten_the_result() {
    let dir = scratch("csv");
    let out = hdx(&dir, &["--format", "csv", "grassmann", "--q", "2", "--n", "4", "--d", "3", "--walk", "containment", "--k", "1", "--l", "0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.contains("result.levels.0.size,15\n"));
    assert!(text.contains("result.walk.pass,true\n"));
}

#[test]
fn report_file_and_timing() {
    let dir = scratch("timing");
    let out = hdx(&dir, &["--timing", "--report", "r.json", "grassmann", "--q", "2", "--n", "3", "--d", "2"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("r.json")).unwrap()).unwrap();
    assert!(r["manifest"]["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn stav_check_and_emitted_stav_agree() {
    let dir = scratch("stav");
    report(&hdx(&dir, &["build", "--complete", "9", "5", "-o", "k9.json"]));
    let direct = report(&hdx(&dir, &["stav-check", "--complex", "k9.json", "--l", "1"]));
    assert_eq!(direct["result"]["invariants_hold"], true);
    assert_eq!(direct["result"]["good"], true);
    let emitted = report(&hdx(&dir, &["stav-check", "--complex", "k9.json", "--l", "1", "--emit", "x.json", "--skip-goodness"]));
    assert_eq!(emitted["result"]["invariants_hold"], true);
    let from_file = report(&hdx(&dir, &["stav-check", "--stav", "file", "--stav-file", "x.json", "--skip-goodness"]));
    assert_eq!(from_file["result"]["sizes"], emitted["result"]["sizes"]);
}

#[test]
fn mixing_with_explicit_sets() {
    let dir = scratch("mixing");
    report(&hdx(&dir, &["build", "--complete", "8", "3", "-o", "k8.json"]));
    let r = report(&hdx(&dir, &["mixing", "k8.json", "--set", "0:0;1;2", "--set", "0:4;5"]));
    assert_eq!(r["result"]["sets"][0]["faces"], 3);
    assert!(r["result"]["report"]["measured"].as_f64().unwrap() > 0.0);
    let missing_seed = hdx(&dir, &["mixing", "k8.json", "--random", "0,0"]);
    assert_eq!(missing_seed.status.code(), Some(1));
}
