use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_volblocks"));
    c.env_remove("VOLBLOCKS_WORKERS").env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn volblocks")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "volblocks {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_ticks(dir: &Path) -> String {
    let p = dir.join("ticks.csv");
    let p = p.to_str().unwrap().to_string();
    ok(&["simulate", "--model", "model2", "--thin", "10", "--ticks", "--seed", "5", "--out", &p]);
    p
}

#[test]
fn simulate_json_and_csv() {
    let js: Value = serde_json::from_str(&ok(&["simulate", "--model", "model1", "--thin", "20", "--seed", "3"])).unwrap();
    assert!(js.is_object());
    let again: Value = serde_json::from_str(&ok(&["simulate", "--model", "model1", "--thin", "20", "--seed", "3"])).unwrap();
    assert_eq!(js, again);

    let csv = ok(&["simulate", "--model", "model3", "--thin", "20", "--format", "csv"]);
    assert!(csv.lines().count() > 2000);
}

#[test]
fn simulate_ticks_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_ticks(dir.path());
    let text = std::fs::read_to_string(p).unwrap();
    assert_eq!(text.lines().next(), Some("date,time_sec,price"));
    assert!(text.lines().count() > 4000);
}

#[test]
fn estimate_rk_auto_and_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_ticks(dir.path());
    let auto: Value = serde_json::from_str(&ok(&["estimate", "rk", "--input", &p, "--blocks", "2", "--auto"])).unwrap();
    let default: Value = serde_json::from_str(&ok(&["estimate", "rk", "--input", &p, "--blocks", "2"])).unwrap();
    assert_eq!(auto, default);
    let day = &auto[0];
    assert_eq!(day["estimator"], "rk-th2");
    assert_eq!(day["blocks"], 2);
    let total = day["total"].as_f64().unwrap();
    assert!(total > 0.0 && total < 0.01, "{total}");
    assert!(day["avar"].as_f64().unwrap() > 0.0);

    let fixed: Value =
        serde_json::from_str(&ok(&["estimate", "rk", "--input", &p, "--bandwidth", "8", "--kernel", "parzen"])).unwrap();
    assert_eq!(fixed[0]["estimator"], "rk-parzen");
    assert!(fixed[0]["total"].as_f64().unwrap() > 0.0);

    let clash = run(&["estimate", "rk", "--input", &p, "--bandwidth", "8", "--auto"]);
    assert!(!clash.status.success());
}

#[test]
fn estimate_qmle_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_ticks(dir.path());
    let js: Value = serde_json::from_str(&ok(&["estimate", "qmle", "--input", &p])).unwrap();
    assert_eq!(js[0]["estimator"], "qmle");
    assert!(js[0]["total"].as_f64().unwrap() > 0.0);

    let csv = ok(&["estimate", "qmle", "--input", &p, "--blocks", "4", "--format", "csv"]);
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# volblocks estimate"));
    assert_eq!(lines.next(), Some("date,estimator,blocks,total,avar"));
    assert!(lines.next().unwrap().contains(",qmle,4,"));
}

#[test]
fn mc_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mc.json");
    let mut v = serde_json::to_value(volblocks::harness::mc::McConfig::desk("model2")).unwrap();
    v["replications"] = 2.into();
    v["sizes"] = serde_json::json!([2340]);
    v["blocks"] = serde_json::json!([1, 2]);
    std::fs::write(&cfg, v.to_string()).unwrap();
    let out = dir.path().join("mc.json.out");
    ok(&[
        "mc",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["replications"], 2);
    assert_eq!(r["seed"], 9);
    assert_eq!(r["cells"].as_array().unwrap().len(), 2 * 2);

    let csv = ok(&["mc", "--config", cfg.to_str().unwrap(), "--format", "csv", "--replications", "1"]);
    assert!(csv.starts_with('#'));
}

#[test]
fn avar_curves() {
    let r: Value = serde_json::from_str(&ok(&["avar", "--n-tau", "3", "--max-blocks", "2", "--estimators", "qmle"])).unwrap();
    let pts = r["points"].as_array().unwrap();
    assert_eq!(pts.len(), 3 * 2);
    assert!(pts.iter().all(|p| p["estimator"] == "qmle"));
}

#[test]
fn empirical_on_ticks() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_ticks(dir.path());
    let r: Value = serde_json::from_str(&ok(&["empirical", "--input", &p, "--blocks", "1,2"])).unwrap();
    assert_eq!(r["days"].as_array().unwrap().len(), 1);
    assert_eq!(r["blocks"], serde_json::json!([1, 2]));
}

#[test]
fn errors_are_reported() {
    let zero = run(&["--workers", "0", "simulate"]);
    assert!(!zero.status.success());
    assert!(String::from_utf8_lossy(&zero.stderr).contains("workers"));

    let bad = run(&["simulate", "--model", "model9"]);
    assert!(!bad.status.success());

    let missing = run(&["estimate", "qmle", "--input", "/nonexistent/ticks.csv"]);
    assert!(!missing.status.success());

    let env_zero = bin().env("VOLBLOCKS_WORKERS", "0").args(["simulate", "--thin", "50"]).output().unwrap();
    assert!(!env_zero.status.success());
    let env_one = bin().env("VOLBLOCKS_WORKERS", "1").args(["simulate", "--thin", "50"]).output().unwrap();
    assert!(env_one.status.success());
}
