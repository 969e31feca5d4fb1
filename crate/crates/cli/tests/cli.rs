use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn chiral(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chiral"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CHIRAL_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn reduce_reports_both_chi_tilde_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = chiral(
        &[
            "reduce", "--lambda", "1", "--mu", "1", "--rho", "1", "--rho-rot", "1", "--kappa1", "3", "--kappa3", "1",
            "--v2", "4", "--chi", "0.1",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let setup = &r["setup"];
    assert_eq!(setup["c1"].as_f64(), Some(4.0));
    // a = ρ_rot v² - (κ₁+6κ₃)/3 = 1, d = (λ+μ) + λ²/(ρv² - λ - 2μ) = 3
    assert!((setup["m_sq"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!((setup["c2"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert!((setup["chi_tilde"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    assert!(setup["chi_tilde_printed"].is_number());
    assert!(listing(tmp.path()).is_empty(), "reduce without --out writes nothing");
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["reduce", "--no-such-flag"],
        vec!["reduce", "--kappa1", "1", "--m", "1"],
        vec!["soliton", "--m", "1", "--range", "3:1"],
        vec!["soliton", "--m", "1", "--order", "3"],
        vec!["simulate", "--dz", "0.05", "--dt", "1.0", "--out", "x"],
    ] {
        let out = chiral(&args, tmp.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn soliton_csv_is_deterministic_and_confined_to_out() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "soliton", "--m", "2", "--chi-tilde", "0.6", "--order", "1", "--range", "-5:5", "--samples", "1001", "--out", "a",
    ];
    assert_eq!(chiral(&args, tmp.path()).status.code(), Some(0));
    let mut again = args;
    again[12] = "b";
    assert_eq!(chiral(&again, tmp.path()).status.code(), Some(0));
    assert_eq!(listing(tmp.path()), ["a", "b"]);
    assert_eq!(listing(&tmp.path().join("a")), ["manifest.json", "soliton.csv"]);

    let a = fs::read(tmp.path().join("a/soliton.csv")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("b/soliton.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,F0,F1,F2,F,phi"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 1001);
    // centre row: F = π, φ = π/2
    assert_eq!(rows[500][0], 0.0);
    assert!((rows[500][5] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    // F = F₀ + χ̃F₁ at first order, φ = F/2
    for r in &rows {
        assert!((r[4] - (r[1] + 0.6 * r[2])).abs() < 1e-14);
        assert_eq!(r[5], 0.5 * r[4]);
    }
}

#[test]
fn environment_variable_sets_default_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_chiral"))
        .args(["soliton", "--m", "1", "--samples", "11"])
        .current_dir(tmp.path())
        .env("CHIRAL_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(listing(&tmp.path().join("from-env")), ["manifest.json", "soliton.csv"]);
}

#[test]
fn simulate_reproduces_from_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let first = chiral(&["simulate", "--dz", "0.05", "--chi-tilde", "0.05", "--t-end", "1", "--out", "r1"], tmp.path());
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(listing(&tmp.path().join("r1")), ["manifest.json", "snapshots.csv", "summary.json"]);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("r1/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["outputs"], serde_json::json!(["snapshots.csv", "summary.json"]));

    let second = chiral(&["simulate", "--params", "r1/manifest.json", "--out", "r2"], tmp.path());
    assert_eq!(second.status.code(), Some(0));
    for f in ["snapshots.csv", "summary.json"] {
        assert_eq!(
            fs::read(tmp.path().join("r1").join(f)).unwrap(),
            fs::read(tmp.path().join("r2").join(f)).unwrap(),
            "{f}"
        );
    }

    let summary: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("r1/summary.json")).unwrap()).unwrap();
    assert!((summary["chi_tilde"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    assert!(summary["observations"].as_array().unwrap().len() > 2);
    let csv = fs::read_to_string(tmp.path().join("r1/snapshots.csv")).unwrap();
    assert!(csv.starts_with("t,z,phi,psi\n"));
}

#[test]
fn flags_override_parameter_file() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("p.json"), r#"{"lambda": 1, "mu": 1, "m": 1.5, "v2": 4}"#).unwrap();
    let out = chiral(&["reduce", "--params", "p.json", "--kappa1", "3", "--kappa3", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["params"]["kappa1"].as_f64(), Some(3.0));
    assert_eq!(r["params"]["lambda"].as_f64(), Some(1.0));

    let out = chiral(&["reduce", "--params", "p.json", "--kappa3", "1"], tmp.path());
    let r = json(&out);
    assert!((r["setup"]["m_sq"].as_f64().unwrap() - 2.25).abs() < 1e-12);

    fs::write(tmp.path().join("bad.json"), r#"{"lambda": 1, "shear": 2}"#).unwrap();
    assert_eq!(chiral(&["reduce", "--params", "bad.json"], tmp.path()).status.code(), Some(2));
}

#[test]
fn mirror_check_exit_status_follows_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["mirror-check", "--dz", "0.05", "--chi-tilde", "0.05", "--t-end", "1", "--out", "m"];
    let out = chiral(&base, tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["passed"], true);
    assert_eq!(r["senses_opposite"], true);

    let mut strict = base.to_vec();
    strict.extend(["--tol", "0"]);
    let r = json(&chiral(&strict, tmp.path()));
    // a zero tolerance only fails when the deviation is nonzero
    let deviation = r["max_deviation"].as_f64().unwrap();
    assert_eq!(r["passed"], deviation == 0.0);
}

#[test]
fn verify_reports_suite_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = chiral(&["verify", "--suite", "planar", "--trials", "5", "--seed", "7", "--out", "v"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["passed"], true);
    assert_eq!(r["suites"][0]["suite"], "planar");
    assert_eq!(listing(&tmp.path().join("v")), ["manifest.json", "verify.json"]);
}
