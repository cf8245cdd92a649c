use std::path::Path;
use std::process::Command;

use rdde::harness::{parse_config, run, validate_config, Experiment, RunStatus};
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rdde"))
}

fn constant_config(experiment: &str, b: f64, m: i64) -> Value {
    json!({
        "experiment": experiment,
        "driver": {"dimension": 2, "kind": "constant", "a": [[0, 0], [0, 0]], "b": [[b, 0], [0, b]]},
        "grid": {"m": m},
        "spectrum": {"k": 2, "horizon": 200, "transient": 20}
    })
}

fn write(dir: &Path, name: &str, v: &Value) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn validation_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = write(tmp.path(), "ok.json", &constant_config("oracle", 1.0, 64));
    assert!(validate_config(&ok).is_ok());

    let neg = write(tmp.path(), "neg.json", &constant_config("oracle", 1.0, -4));
    let msg = validate_config(&neg).unwrap_err().to_string();
    assert!(msg.contains("grid.m"), "{msg}");
    assert!(msg.contains("line"), "{msg}");

    let small = write(tmp.path(), "small.json", &constant_config("oracle", 1.0, 2));
    assert!(validate_config(&small).unwrap_err().to_string().contains("grid.m"));

    let mut tel = constant_config("compare", 1.0, 16);
    tel["driver"] = json!({
        "dimension": 1, "kind": "telegraph",
        "states": [{"a": [[0]], "b": [[1]]}, {"a": [[-1]], "b": [[0]]}],
        "generator": [[-1, 2], [1, -1]]
    });
    let tel = write(tmp.path(), "tel.json", &tel);
    assert!(validate_config(&tel).unwrap_err().to_string().contains("generator"));

    let mut extra = constant_config("spectrum", 1.0, 16);
    extra["spectrum"]["horizn"] = json!(5);
    let extra = write(tmp.path(), "extra.json", &extra);
    assert!(validate_config(&extra).unwrap_err().to_string().contains("horizn"));

    let mut k = constant_config("spectrum", 1.0, 4);
    k["spectrum"]["k"] = json!(100);
    let k = write(tmp.path(), "k.json", &k);
    assert!(validate_config(&k).unwrap_err().to_string().contains("spectrum"));

    assert!(parse_config("{ not json").is_err());
}

#[test]
fn hash_is_stable_under_reserialization() {
    let cfg = parse_config(&constant_config("oracle", 1.0, 16).to_string()).unwrap();
    let again = parse_config(&serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    assert_eq!(cfg.hash(), again.hash());
    assert_eq!(cfg.hash().len(), 64);
    assert_ne!(cfg.hash(), cfg.clone().with_seed(5).hash());
}

#[test]
fn compare_on_zero_driver_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = constant_config("compare", 0.0, 16);
    v["spectrum"] = json!({"k": 2, "horizon": 40, "transient": 4});
    let cfg = parse_config(&v.to_string()).unwrap();
    let m = run(&cfg, tmp.path()).unwrap();
    assert_eq!(m.status, RunStatus::Ok);
    assert_eq!(m.passed, Some(true));
    let r = report(tmp.path(), "compare.json");
    assert_eq!(r["config_hash"], json!(cfg.hash()));
    for g in r["report"]["exponent_gaps"].as_array().unwrap() {
        assert!(g.as_f64().unwrap() <= 1e-8);
    }
    assert!(r["report"]["all_pass"].as_bool().unwrap());
}

#[test]
fn oracle_row_for_delayed_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(&constant_config("oracle", 1.0, 64).to_string()).unwrap();
    assert_eq!(cfg.experiment, Experiment::Oracle);
    let m = run(&cfg, tmp.path()).unwrap();
    assert_eq!(m.passed, Some(true));
    let r = report(tmp.path(), "oracle.json");
    let row = &r["report"]["rows"][0];
    assert!((row["oracle"].as_f64().unwrap() - 0.567143).abs() < 1e-6);
    assert!((row["estimate"].as_f64().unwrap() - 0.567143).abs() < 1e-3);
    assert!(row["gap"].as_f64().unwrap() < 1e-3);
    let csv = std::fs::read_to_string(tmp.path().join("oracle.csv")).unwrap();
    assert!(csv.starts_with("index,estimate,oracle,gap\n1,"));
}

#[test]
fn reports_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = constant_config("spectrum", 0.5, 16);
    v["driver"] = json!({
        "dimension": 1, "kind": "telegraph", "seed": 3,
        "states": [{"a": [[-0.5]], "b": [[0.3]]}, {"a": [[0.1]], "b": [[-0.4]]}],
        "generator": [[-1, 1], [1, -1]]
    });
    v["spectrum"] = json!({"k": 2, "horizon": 60});
    let cfg = parse_config(&v.to_string()).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&cfg, &a).unwrap();
    run(&cfg, &b).unwrap();
    for f in ["spectrum.json", "spectrum.csv", "spectrum_series.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    run(&cfg.clone().with_seed(4), &c).unwrap();
    assert_ne!(std::fs::read(a.join("spectrum.json")).unwrap(), std::fs::read(c.join("spectrum.json")).unwrap());
}

#[test]
fn converge_and_bounds_emit_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = constant_config("converge", 0.3, 4);
    v["spectrum"] = json!({"k": 1, "horizon": 40});
    run(&parse_config(&v.to_string()).unwrap(), tmp.path()).unwrap();
    let r = report(tmp.path(), "converge.json");
    let ms: Vec<u64> = r["report"]["rows"].as_array().unwrap().iter().map(|x| x["m"].as_u64().unwrap()).collect();
    assert_eq!(ms, vec![4, 8, 16]);

    v["experiment"] = json!("bounds");
    v["audit_samples"] = json!(10);
    let m = run(&parse_config(&v.to_string()).unwrap(), tmp.path()).unwrap();
    assert!(m.outputs.contains(&"bounds_audit.csv".to_string()));
    let r = report(tmp.path(), "bounds.json");
    assert_eq!(r["report"]["audit"]["checks"].as_array().unwrap().len(), 7);
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = write(tmp.path(), "ok.json", &constant_config("oracle", 1.0, 16));
    let out = tmp.path().join("out");

    let st = bin().args(["validate", "--config"]).arg(&ok).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let bad = write(tmp.path(), "bad.json", &constant_config("oracle", 1.0, -1));
    let o = bin().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.m"));

    let st = bin().args(["run", "--threads", "2", "--config"]).arg(&ok).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(out.join("manifest.json").exists());

    let mut strict = constant_config("oracle", 1.0, 4);
    strict["oracle_tolerance"] = json!(1e-12);
    let strict = write(tmp.path(), "strict.json", &strict);
    let st = bin().args(["run", "--config"]).arg(&strict).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let st = bin().args(["run", "--strict", "--config"]).arg(&strict).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(3));

    let mut blow = constant_config("spectrum", 0.0, 8);
    blow["driver"]["a"] = json!([[1e200, 0], [0, 1e200]]);
    let blow = write(tmp.path(), "blow.json", &blow);
    let fail = tmp.path().join("fail");
    let st = bin().args(["run", "--config"]).arg(&blow).arg("--out").arg(&fail).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let m = report(&fail, "manifest.json");
    assert_eq!(m["status"], json!("numerical_failure"));

    let seeded = bin().args(["run", "--seed", "9", "--config"]).arg(&ok).arg("--out").arg(&out).output().unwrap();
    assert_eq!(seeded.status.code(), Some(0));
    let manifest: Value = serde_json::from_slice(&seeded.stdout).unwrap();
    let base = parse_config(&std::fs::read_to_string(&ok).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], json!(base.with_seed(9).hash()));

    let v = bin().arg("version").output().unwrap();
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("rdde "));
}
