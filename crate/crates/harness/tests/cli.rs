use std::path::Path;
use std::process::{Command, Output};

use covapprox::report::{sidecar_path, Report};

fn covapprox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covapprox"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn unknown_experiment_is_a_config_error() {
    let out = covapprox(&["experiment", "no_such_thing"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("zigzag_sphere"), "{err}");
}

#[test]
fn bad_config_files_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "a.toml", "etaa = 0.1\n");
    assert_eq!(
        covapprox(&["--config", &unknown, "experiment", "slab_gaussian"])
            .status
            .code(),
        Some(2)
    );
    let ellipsoid = write(dir.path(), "b.toml", "eta = 0.3\n");
    assert_eq!(
        covapprox(&["--config", &ellipsoid, "experiment", "ellipsoid_l4"])
            .status
            .code(),
        Some(2)
    );
    let slab = write(dir.path(), "c.toml", "eta = 0.5\n");
    assert_eq!(
        covapprox(&["--config", &slab, "experiment", "slab_sharp"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        covapprox(&["--config", "/nonexistent.toml", "baseline"]).status.code(),
        Some(2)
    );
    assert_eq!(covapprox(&["--bogus-flag"]).status.code(), Some(2));
}

#[test]
fn assert_flag_maps_threshold_failure_to_3() {
    // Tiny sample: the smoothed body is biased well above 1.5 here.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "d = 2\nseeds = 1\nsamples = 200\n");
    let out_path = dir.path().join("r.json");
    let out = covapprox(&[
        "--config",
        &cfg,
        "--directions",
        "100",
        "--out",
        out_path.to_str().unwrap(),
        "experiment",
        "slab_gaussian",
        "--assert",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let report = Report::from_json(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report.passed, Some(false));

    // Without --assert the same run succeeds.
    let out = covapprox(&["--config", &cfg, "--directions", "100", "experiment", "slab_gaussian"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "experiment = \"slab_sharp\"\nseed = 11\nseeds = 2\nd = 4\n",
    );
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = covapprox(&[
            "--config",
            &cfg,
            "--directions",
            "200",
            "--out",
            p.to_str().unwrap(),
            "experiment",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(sidecar_path(p).exists());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let report = Report::from_json(&text).unwrap();
    assert_eq!(report.experiment, "slab_sharp");
    assert_eq!(report.seed, 11);
    assert_eq!(report.rows.len(), 2);
    assert_eq!(Report::from_json(&report.to_json().unwrap()).unwrap(), report);

    // A different seed changes the numbers.
    let c = dir.path().join("c.json");
    covapprox(&[
        "--config",
        &cfg,
        "--seed",
        "12",
        "--directions",
        "200",
        "--out",
        c.to_str().unwrap(),
        "experiment",
    ]);
    assert_ne!(text, std::fs::read_to_string(&c).unwrap());
}

#[test]
fn csv_output_has_header() {
    let out = covapprox(&["--format", "csv", "--trials", "1000", "experiment", "rademacher_bound"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("distribution,k,d,mean,stderr,bound,limit,ok"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn baseline_columns() {
    let out = covapprox(&["--format", "csv", "baseline"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("seed,d,N,p,deviation,max_norm_term,moment_term,truncation_term"));
}

#[test]
fn build_emits_body_and_network() {
    let out = covapprox(&["build", "--network"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["kind"], "slab");
    assert!(!v["network"]["units"].as_array().unwrap().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "e.toml",
        "mode = \"ellipsoid\"\nm = 4\nblocks = 20\neta = 0.2\n",
    );
    let out = covapprox(&["--config", &cfg, "build"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["kind"], "ellipsoid");
    // Networks exist only for slab bodies.
    assert_eq!(
        covapprox(&["--config", &cfg, "build", "--network"]).status.code(),
        Some(2)
    );
}

#[test]
fn certify_and_estimate_m0_run() {
    let out = covapprox(&["--directions", "500", "certify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = Report::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(r.get("min_ratio").unwrap().as_f64().unwrap() > 0.0);

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.toml",
        "d = 4\neta = 0.2\ncandidates = [16, 256, 4096, 65536]\n",
    );
    let out = covapprox(&["--config", &cfg, "estimate-m0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = Report::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(r.get("m0").unwrap().as_f64().is_some());
}

#[test]
fn list_names_every_experiment() {
    let out = covapprox(&["experiment", "--list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in covapprox::experiments::names() {
        assert!(text.contains(name));
    }
}
