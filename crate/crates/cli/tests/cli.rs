use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn bhflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bhflow")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Writes a shipped config with some top-level keys replaced or added.
fn variant(dir: &TempDir, base: &str, extra: &str) -> String {
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(config(base)).unwrap()).unwrap();
    let extra: Value = serde_json::from_str(&format!("{{{extra}}}")).unwrap();
    doc.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    let path = dir.path().join(format!("{}.json", dir.path().read_dir().unwrap().count()));
    std::fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn verify_default_e1_passes() {
    let o = bhflow(&["verify", "--config", config("e1.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&o);
    assert_eq!(doc["schema"], "bhflow-report/1");
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["environment"]["surface"], "cp1xcp1");
    assert_eq!(doc["environment"]["section_sha256"].as_str().unwrap().len(), 64);
    let names: Vec<&str> = doc["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for n in ["phi2_expansion", "phi1_expansion", "norm_phi", "compat_minus", "group_law"] {
        assert!(names.contains(&n), "{n}");
    }
}

#[test]
fn unachievable_tolerance_fails_verification() {
    let dir = TempDir::new().unwrap();
    let cfg = variant(&dir, "e1.json", r#""tolerances":{"identity":1e-20}"#);
    let o = bhflow(&["verify", "--config", &cfg, "--samples", "5"]);
    assert_eq!(code(&o), 1);
    let doc = json(&o);
    assert_eq!(doc["pass"], false);
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let short = dir.path().join("short.json");
    std::fs::write(&short, r#"{"surface":"cp1xcp1","coefficients":[[1,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0]]}"#).unwrap();
    let o = bhflow(&["verify", "--config", short.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("coefficients"));

    let unknown = variant(&dir, "e2.json", r#""flavour":1"#);
    assert_eq!(code(&bhflow(&["scan", "--config", &unknown])), 2);
    assert_eq!(code(&bhflow(&["scan", "--config", "/nonexistent/x.json"])), 2);
    assert_eq!(code(&bhflow(&["scan"])), 2);
    assert_eq!(code(&bhflow(&["frobnicate"])), 2);
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = config("e2.json");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = bhflow(&["verify", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        assert!(o.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = bhflow(&["verify", "--config", cfg.to_str().unwrap(), "--seed", "10"]);
    assert_ne!(c.stdout, std::fs::read(&a).unwrap());
}

#[test]
fn scan_examples() {
    let e1 = config("e1.json");
    let o = bhflow(&["scan", "--config", e1.to_str().unwrap(), "--samples", "30"]);
    assert_eq!(code(&o), 0);
    assert!(json(&o)["t_max"].as_f64().unwrap() > 0.0);

    let o = bhflow(&["scan", "--config", e1.to_str().unwrap(), "--samples", "10", "--t", "0"]);
    assert_eq!(json(&o)["t_max"], 0.0);
    assert_eq!(code(&o), 1);

    let dir = TempDir::new().unwrap();
    let inverted = variant(&dir, "e1.json", r#""metric":"inverted""#);
    let o = bhflow(&["scan", "--config", &inverted, "--samples", "10"]);
    let doc = json(&o);
    assert_eq!(doc["t_max"], 0.0);
    assert_eq!(doc["failure_count"], 100);
}

#[test]
fn export_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = config("e2.json");
    let out = dir.path().join("grid.csv");
    let o = bhflow(&[
        "export",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "2",
        "--t",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# bhflow-grid/1"));
    assert_eq!(
        lines.next().unwrap(),
        "re_z1,im_z1,re_z2,im_z2,section_norm_sq,f,p,g_min_eigenvalue,phi_norm_sq,rho_sq"
    );
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[6] == 1.0));

    let o = bhflow(&["export", "--config", cfg.to_str().unwrap(), "--grid", "5", "--t", "0.1"]);
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 25);
    for r in rows.iter().filter(|r| r[7] > 0.0) {
        assert!((r[8] - 4.0 * (1.0 - r[6] * r[6])).abs() < 1e-7);
    }
}

#[test]
fn unwritable_output_exits_2() {
    let cfg = config("e2.json");
    let o = bhflow(&["export", "--config", cfg.to_str().unwrap(), "--grid", "2", "--out", "/nonexistent/dir/g.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn curve_examples() {
    let o = bhflow(&["curve", "--config", config("e2.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let doc = json(&o);
    let disps = doc["curve"]["diagnostics"]["displacements"].as_array().unwrap();
    assert_eq!(disps.len(), 20);
    for d in disps {
        assert!((d[0].as_f64().unwrap() + 0.1).abs() < 1e-6);
        assert!(d[1].as_f64().unwrap().abs() < 1e-6);
    }

    let o = bhflow(&["curve", "--config", config("e1.json").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate anticanonical divisor"));
}

#[test]
fn limit_examples() {
    let e1 = config("e1.json");
    let o = bhflow(&["limit", "--config", e1.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rows = json(&o)["limit"]["rows"].as_array().unwrap().len();
    assert_eq!(rows, 4);
    assert_eq!(code(&bhflow(&["limit", "--config", e1.to_str().unwrap(), "--t", "0.1"])), 2);
}
