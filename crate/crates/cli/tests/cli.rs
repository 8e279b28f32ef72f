use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nullframe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nullframe")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const SMALL_CERTIFY: &str = r#"{"mode":"certify","seed":7,"certify":{"commutator_pairs":1,"commutator_max_order":2,
"frame_samples":20,"point_samples":40,"weight_samples":200}}"#;

#[test]
fn certify_writes_reports_and_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_CERTIFY);
    let out = tmp.path().join("out");
    let o = nullframe(&["certify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("certify.json"));
    assert_eq!(report["passed"], Value::Bool(true));
    assert_eq!(report["seed"], 7);
    assert!(out.join("certify.csv").exists());
    let log = std::fs::read_to_string(out.join("run.jsonl")).unwrap();
    assert!(log.lines().next().unwrap().contains("\"start\""));
    assert!(log.lines().last().unwrap().contains("\"finish\""));
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_CERTIFY);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        let o = nullframe(&["certify", "--config", &cfg, "--out", d.to_str().unwrap(), "--seed", "99"]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["certify.json", "certify.csv", "run.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(read_json(&a.join("certify.json"))["seed"], 99);
}

#[test]
fn constraint_violations_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"weights":{"gamma":-1}}"#);
    let o = nullframe(&["certify", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["kind"], "constraint_error");
    assert_eq!(rec["message"], "gamma must be > 0");

    let cfg = write_config(tmp.path(), "d.json", r#"{"weights":{"mu":0.1}}"#);
    let o = nullframe(&["certify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu must be < 0"));
}

#[test]
fn schema_errors_report_the_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"times":{"t2":"soon"}}"#);
    let o = nullframe(&["evolve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["kind"], "schema_error");
    assert_eq!(rec["path"], "times.t2");
}

#[test]
fn mismatched_mode_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"mode":"evolve"}"#);
    let o = nullframe(&["certify", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_CERTIFY);
    let o = nullframe(&["certify", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn evolve_zero_data_gives_zero_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "e.json",
        r#"{"grid":{"n":12,"extent":3},"times":{"t1":0.25,"t2":0.5},"region":{"q0":-0.25},"snapshots":[0.5]}"#,
    );
    let out = tmp.path().join("out");
    let o = nullframe(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("energy_n12.csv")).unwrap();
    let mut rows = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        for v in r.iter().skip(2) {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0);
        }
        rows += 1;
    }
    assert!(rows >= 2);
    assert!(out.join("steps_n12.jsonl").exists());
    assert!(out.join("snapshot_n12_0.bin").exists());
    let s = read_json(&out.join("evolve.json"));
    assert_eq!(s["runs"][0]["max_abs_phi"], 0.0);
}

#[test]
fn conserve_reports_budgets_and_orders() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"grid":{"n":12,"extent":4},"times":{"t1":0.5,"t2":1.0},"region":{"q0":-0.25},
            "initial":{"kind":"gaussian","width":0.7},"conserve":{"resolutions":[12,16]}}"#,
    );
    let out = tmp.path().join("out");
    let o = nullframe(&["conserve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&out.join("conserve.json"));
    let m = &s["monitors"][0];
    assert_eq!(m["budgets"].as_array().unwrap().len(), 2);
    assert_eq!(m["residual_convergence"]["orders"].as_array().unwrap().len(), 1);
    assert!(m["flat_max_relative_increase"].is_number());
    let text = std::fs::read_to_string(out.join("conserve.csv")).unwrap();
    assert!(text.starts_with("n,monitor,id,label,value"));
    assert!(text.contains("cone_flux"));
}

#[test]
fn refine_flag_sets_the_resolution_ladder() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "e.json", r#"{"grid":{"n":12,"extent":3},"times":{"t2":0.25}}"#);
    let out = tmp.path().join("out");
    let o = nullframe(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap(), "--refine", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("energy_n12.csv").exists());
    assert!(out.join("energy_n18.csv").exists());
}

#[test]
fn estimate_reports_implied_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "e.json",
        r#"{"grid":{"n":12,"extent":4},"times":{"t1":0.0,"t2":0.5},
            "initial":{"kind":"outgoing_shell","radius":1.2,"width":0.5}}"#,
    );
    let out = tmp.path().join("out");
    let o = nullframe(&["estimate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&out.join("estimate.json"));
    let c = s["implied_constant_variation"][0]["implied_constants"][0].as_f64().unwrap();
    assert!(c.is_finite() && c > 0.0);
    let text = std::fs::read_to_string(out.join("estimate.csv")).unwrap();
    assert!(text.contains("implied_constant"));
}

#[test]
fn commutator_reports_terms_with_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "k.json",
        r#"{"commutator":{"multi_indices":["S"],"components":["L"],"lattice":2,"polish":0,"identity_pairs":1}}"#,
    );
    let out = tmp.path().join("out");
    let o = nullframe(&["commutator", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&out.join("commutator.json"));
    let r = &s["reports"][0]["levels"][0]["report"];
    for key in ["lhsNorm", "identityResidual", "boundValue", "impliedConstant", "terms"] {
        assert!(!r[key].is_null(), "{key}");
    }
    assert!(r["identityResidual"].as_f64().unwrap() <= 1e-10);
    assert!(s["reports"][0]["lbarDecouplingDefect"].as_f64().unwrap() <= 1e-12);
    let ids: Vec<&str> = r["terms"].as_array().unwrap().iter().map(|t| t["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["lower_order_wave", "good_factor_H_dPhi", "bad_factor_HLL_dPhi_frame"]);
}

#[test]
fn lbar_component_is_rejected_for_the_tangential_set() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "k.json", r#"{"commutator":{"components":["Lbar"]}}"#);
    let o = nullframe(&["commutator", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}
