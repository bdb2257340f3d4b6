use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn chiralguide(dir: &Path, config: Option<&str>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chiralguide"));
    cmd.current_dir(dir).env_remove("CHIRALGUIDE_OUT");
    if let Some(text) = config {
        let path = dir.join("config.toml");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.args(args).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn emit_without_qubits_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = chiralguide(dir.path(), None, &["emit", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("qubits"));
}

#[test]
fn unknown_keys_and_units_are_rejected() {
    let dir = TempDir::new().unwrap();
    let out = chiralguide(dir.path(), Some("[waveguide]\nspeed = \"1 m/s\"\n"), &["bands", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("speed"));
    let out = chiralguide(dir.path(), Some("[[qubits]]\nfrequency = \"3 um\"\ngamma0 = \"1 MHz\"\n"), &["emit"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("qubits[0].frequency"));
}

#[test]
fn bands_writes_table_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = chiralguide(dir.path(), Some("[numerics]\nn_k = 64\n"), &["bands", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("o/bands.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[3], "freq_ghz");
    assert_eq!(headers.len(), 6 + 5);
    assert_eq!(reader.records().count(), 5 * 64);
    let manifest = json(&dir.path().join("o/manifest.json"));
    assert_eq!(manifest["command"], "bands");
    assert_eq!(manifest["config"]["numerics"]["n_k"], 64);
    assert_eq!(manifest["config"]["waveguide"]["n_floquet"], 2);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn json_format_and_output_root() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_chiralguide"))
        .current_dir(dir.path())
        .env("CHIRALGUIDE_OUT", dir.path().join("root"))
        .args(["regimes", "--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows = json(&dir.path().join("root/regimes/regimes.json"));
    assert!(rows.as_array().unwrap().iter().any(|r| r["regime"] == "right-chiral"));
}

#[test]
fn validate_reports_superluminal_drive() {
    let dir = TempDir::new().unwrap();
    let out = chiralguide(dir.path(), Some("[waveguide]\nvd = \"1.2 v0\"\n"), &["validate", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("o/validate.json"));
    assert_eq!(report["ok"], false);
    assert_eq!(check(&report, "stability")["status"], "fail");
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL  stability"));
}

#[test]
fn validate_reference_waveguide_has_no_failures() {
    let dir = TempDir::new().unwrap();
    let out = chiralguide(dir.path(), None, &["validate", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("o/validate.json"));
    assert_eq!(report["ok"], true);
    assert!(check(&report, "cj_ratio")["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn markov_warning_applies_to_cascade_only() {
    // 3.02 GHz: v ≈ 0.789 v0, Γ_T ≈ 1.241 Γ0, so 69 λ_d gives τΓ_T ≈ 0.5
    let config = r#"
        [[qubits]]
        frequency = "3.02 GHz"
        gamma0 = "5 MHz"
        [network]
        separation = "69 lambda_d"
    "#;
    let dir = TempDir::new().unwrap();
    let out = chiralguide(dir.path(), Some(config), &["validate", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("o/validate.json"));
    let cascade = check(&report, "markov_cascade");
    let tau_gamma = cascade["value"].as_f64().unwrap();
    assert!((tau_gamma - 0.5).abs() < 0.02, "{tau_gamma}");
    assert_eq!(cascade["status"], "warn");
    assert_eq!(check(&report, "markov_dynamics")["status"], "pass");
}

#[test]
fn reruns_are_byte_identical() {
    let config = r#"
        [numerics]
        n_k = 128
        [sweep]
        frequencies = { start = "2.6 GHz", stop = "3.8 GHz", points = 25 }
        vd = ["0.05 v0", "0.08 v0"]
    "#;
    let dir = TempDir::new().unwrap();
    for (cmd, files) in [("sweep-beta", &["sweep.csv", "sweep_summary.json"][..]), ("bands", &["bands.csv"][..])] {
        assert!(chiralguide(dir.path(), Some(config), &[cmd, "--out", "a", "--jobs", "1"]).status.success());
        assert!(chiralguide(dir.path(), Some(config), &[cmd, "--out", "b", "--jobs", "3"]).status.success());
        for f in files {
            let a = fs::read(dir.path().join("a").join(f)).unwrap();
            let b = fs::read(dir.path().join("b").join(f)).unwrap();
            assert!(a == b, "{cmd}: {f} differs between runs");
        }
    }
}

#[test]
fn sweep_across_v0_reports_failed_points() {
    let config = r#"
        [numerics]
        n_k = 64
        [sweep]
        frequencies = { start = "3 GHz", stop = "3.1 GHz", points = 2 }
        vd = ["0.05 v0", "1.2 v0"]
    "#;
    let dir = TempDir::new().unwrap();
    let out = chiralguide(dir.path(), Some(config), &["sweep-beta", "--out", "o"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 of 4 points failed"));
    let summary = json(&dir.path().join("o/sweep_summary.json"));
    assert_eq!(summary["failures"].as_array().unwrap().len(), 2);
    assert_eq!(summary["series"][0]["failed"], 0);
    assert!(dir.path().join("o/manifest.json").exists());
}
