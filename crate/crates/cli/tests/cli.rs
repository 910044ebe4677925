use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sotx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sotx")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn generate(dir: &Path, preset: &str, extra: &[&str]) {
    let out = dir.to_str().unwrap();
    let mut args = vec!["generate", "--preset", preset, "--out", out];
    args.extend_from_slice(extra);
    let o = sotx(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn pair_args<'a>(dir: &'a Path, buf: &'a mut Vec<String>) -> Vec<&'a str> {
    buf.push(dir.join("mu.json").to_str().unwrap().to_string());
    buf.push(dir.join("nu.json").to_str().unwrap().to_string());
    vec!["--mu", &buf[0], "--nu", &buf[1]]
}

#[test]
fn generate_cantor_pair_writes_fractal_manifests() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "cantor-pair", &["--depth", "6"]);
    for stem in ["mu", "nu"] {
        let m = json(&dir.path().join(format!("{stem}.json")));
        let ds = m["plus"]["fractal"]["ds"].as_f64().unwrap();
        assert!((ds - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!(m["minus"].as_object().unwrap().is_empty());
        assert_eq!(m["preset"]["params"]["depth"], 6);
    }
}

#[test]
fn generate_mixed_triple_has_all_six_parts() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "mixed-triple", &[]);
    let m = json(&dir.path().join("mu.json"));
    for sign in ["plus", "minus"] {
        for part in ["ac", "atoms", "fractal"] {
            assert!(m[sign][part].is_object(), "{sign} {part} missing");
        }
    }
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sotx(&["generate", "--preset", "nope", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cantor-pair"));
}

#[test]
fn solve_writes_artifacts_and_conserves_mass() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "atoms-signed", &["--count", "20", "--seed", "3"]);
    let out = dir.path().join("solve");
    let mut buf = Vec::new();
    let mut args = vec!["solve"];
    args.extend(pair_args(dir.path(), &mut buf));
    args.extend(["--out", out.to_str().unwrap()]);
    let o = sotx(&args);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("objective"));
    for f in ["plan.json", "duals.json", "map.json", "labels.json", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report = json(&out.join("report.json"));
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    let summary = &report["summary"];
    let regions: f64 = summary["region_masses"].as_object().unwrap().values().map(|v| v.as_f64().unwrap()).sum();
    // both signs together carry 1 + 1/2
    assert!((regions - 1.5).abs() < 1e-6);
    assert!(summary["gap"]["relative"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn mass_imbalance_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    generate(&a, "cantor-pair", &["--depth", "4"]);
    generate(&b, "gaussian-signed", &["--cells", "20"]);
    let o = sotx(&[
        "solve",
        "--mu",
        a.join("mu.json").to_str().unwrap(),
        "--nu",
        b.join("nu.json").to_str().unwrap(),
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mass"));
}

#[test]
fn verify_ma_on_gaussian_preset_passes() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "gaussian-signed", &[]);
    let out = dir.path().join("v");
    let mut buf = Vec::new();
    let mut args = vec!["verify", "ma"];
    args.extend(pair_args(dir.path(), &mut buf));
    args.extend(["--out", out.to_str().unwrap()]);
    let o = sotx(&args);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let report = json(&out.join("verify_ma.json"));
    assert_eq!(report["pass"], true);
    assert_eq!(report["checks"][0]["status"], "pass");
    assert_eq!(report["checks"][0]["details"]["mode"], "refinement");
}

#[test]
fn verify_monotone_and_kernel_pass_on_cantor() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "cantor-pair", &["--depth", "6"]);
    for kind in ["monotone", "kernel", "legendre"] {
        let mut buf = Vec::new();
        let mut args = vec!["verify", kind];
        args.extend(pair_args(dir.path(), &mut buf));
        let out = dir.path().join(kind);
        args.extend(["--out", out.to_str().unwrap()]);
        let o = sotx(&args);
        assert_eq!(code(&o), 0, "{kind}: {}", stdout(&o));
        assert!(stdout(&o).contains("PASS"));
    }
}

#[test]
fn failing_tolerance_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "gaussian-signed", &["--cells", "40"]);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"verify": {"refinement_ratio": 100.0}}"#).unwrap();
    let mut buf = Vec::new();
    let mut args = vec!["verify", "ma"];
    args.extend(pair_args(dir.path(), &mut buf));
    let out = dir.path().join("v");
    args.extend(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let o = sotx(&args);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn bad_config_and_unknown_check_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "atoms-signed", &["--count", "5"]);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"partition": {"delta": -1}}"#).unwrap();
    let mut buf = Vec::new();
    let out = dir.path().join("s");
    let mut args = vec!["solve"];
    args.extend(pair_args(dir.path(), &mut buf));
    args.extend(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&sotx(&args)), 2);

    let mut buf = Vec::new();
    let mut args = vec!["verify", "bogus"];
    args.extend(pair_args(dir.path(), &mut buf));
    assert_eq!(code(&sotx(&args)), 2);
}

#[test]
fn scan_writes_rows_and_flags_sign_flip() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    let mut text = String::from("value\n");
    for k in 0..24 {
        text += if k < 12 { "1\n" } else { "-1\n" };
    }
    fs::write(&series, text).unwrap();
    let out = dir.path().join("scan");
    let o = sotx(&[
        "scan",
        "--series",
        series.to_str().unwrap(),
        "--window",
        "6",
        "--stride",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.join("scan.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "t,R,d_ST");
    // (24 - 6) / 6 window pairs; the middle pair straddles the flip
    assert_eq!(rows.len(), 1 + 3);
    assert!(rows[1].starts_with("6,0,"));
    assert!(rows[2].starts_with("12,1,"));
    assert!(rows[3].starts_with("18,0,"));
}

#[test]
fn scan_rejects_short_series() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("s.csv");
    fs::write(&series, "1\n2\n3\n").unwrap();
    let o = sotx(&["scan", "--series", series.to_str().unwrap(), "--window", "4"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "atoms-signed", &["--count", "15", "--seed", "4"]);
    let mut outputs = Vec::new();
    for run in ["r1", "r2"] {
        let out = dir.path().join(run);
        let mut buf = Vec::new();
        let mut args = vec!["verify", "all"];
        args.extend(pair_args(dir.path(), &mut buf));
        args.extend(["--seed", "4", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&sotx(&args)), 0);
        outputs.push(fs::read(out.join("verify_all.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
