use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use qci::{run, RunConfig};
use serde_json::Value;

const QCI: &str = env!("CARGO_BIN_EXE_qci");

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn qci(kind: &str, config: &Path, out: &Path, jobs: Option<usize>) -> std::process::Output {
    let mut c = Command::new(QCI);
    c.arg(kind).arg("--config").arg(config).arg("--out").arg(out);
    if let Some(j) = jobs {
        c.arg("--jobs").arg(j.to_string());
    }
    c.output().unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap()
}

fn data_rows(path: &Path) -> usize {
    csv::Reader::from_path(path).unwrap().records().count()
}

const FLAT_SWEEP: &str = r#"{
    "model": {"type": "liouville", "a": [1.0], "b": [1.0]},
    "experiment": {"kind": "supnorm-sweep", "hValues": [0.08, 0.05, 0.04, 0.03, 0.02, 0.01], "regions": ["global"]}
}"#;

const CLASSIFY: &str = r#"{
    "model": {"type": "liouville", "a": [2.0, 0.3], "b": [0.5, 0.2]},
    "experiment": {"kind": "classify", "energies": [[1.0, 0.5], [1.0, 0.0]]}
}"#;

#[test]
fn classify_fold_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(CLASSIFY).unwrap();
    let rep = run(&cfg, dir.path()).unwrap();
    assert_eq!(rep.exit_code(), 0);
    let s = summary(dir.path());
    let records = s["records"].as_array().unwrap();
    assert_eq!(records[0]["classification"], "Fold");
    assert_eq!(records[1]["classification"], "RegularGraph");
    assert_eq!(records[0]["caustics"].as_array().unwrap().len(), 2);
    let range = records[0]["e2Range"].as_array().unwrap();
    assert!(range[0].as_f64().unwrap() < 0.5 && range[1].as_f64().unwrap() > 0.5);
}

#[test]
fn flat_torus_sweep_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    run(&RunConfig::from_json(FLAT_SWEEP).unwrap(), dir.path()).unwrap();
    let s = summary(dir.path());
    let e = s["regions"]["global"]["fit"]["exponent"].as_f64().unwrap();
    assert!(e.abs() <= 1e-6, "{e}");
    assert_eq!(data_rows(&dir.path().join("results.csv")), 6);
}

#[test]
fn increasing_h_values_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = FLAT_SWEEP.replace(
        "[0.08, 0.05, 0.04, 0.03, 0.02, 0.01]",
        "[0.01, 0.02, 0.03, 0.04, 0.05, 0.08]",
    );
    let o = qci(
        "supnorm-sweep",
        &write_config(dir.path(), &text),
        &dir.path().join("out"),
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment.hValues"));
    assert!(!dir.path().join("out").join("manifest.json").exists());
}

#[test]
fn unknown_key_reports_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = CLASSIFY.replace("\"energies\"", "\"energy\": [1, 1], \"energies\"");
    let o = qci(
        "classify",
        &write_config(dir.path(), &text),
        &dir.path().join("out"),
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment"));
}

#[test]
fn subcommand_must_match_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = qci(
        "decay",
        &write_config(dir.path(), CLASSIFY),
        &dir.path().join("out"),
        None,
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_refuses_small_h() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "model": {"type": "liouville", "a": [2.0, 0.3], "b": [0.5, 0.2]},
        "experiment": {"kind": "oracle-compare", "h": 0.005}
    }"#;
    let o = qci(
        "oracle-compare",
        &write_config(dir.path(), text),
        &dir.path().join("out"),
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment.h"));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FLAT_SWEEP);
    let out = dir.path().join("out");
    let first: Vec<Vec<u8>> = {
        assert_eq!(qci("supnorm-sweep", &cfg, &out, None).status.code(), Some(0));
        ["results.csv", "errors.csv", "summary.json"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect()
    };
    let m1: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(qci("supnorm-sweep", &cfg, &out, None).status.code(), Some(0));
    for (f, bytes) in ["results.csv", "errors.csv", "summary.json"].iter().zip(&first) {
        assert_eq!(&fs::read(out.join(f)).unwrap(), bytes, "{f}");
    }
    let m2: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m1["files"], m2["files"]);
    assert_eq!(m1["configHash"], m2["configHash"]);
}

#[test]
fn thread_count_does_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FLAT_SWEEP);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(qci("supnorm-sweep", &cfg, &a, Some(1)).status.code(), Some(0));
    assert_eq!(qci("supnorm-sweep", &cfg, &b, Some(4)).status.code(), Some(0));
    for f in ["results.csv", "errors.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failed_items_go_to_errors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "model": {"type": "harmonic_oscillator", "energy": 1.0},
        "experiment": {"kind": "action", "energy": [1.0, 0.0], "points": [[0.5, 0.0], [1.5, 0.0], [2.0, 0.0]]}
    }"#;
    let out = dir.path().join("out");
    let o = qci("action", &write_config(dir.path(), text), &out, None);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(data_rows(&out.join("results.csv")), 2);
    assert_eq!(data_rows(&out.join("errors.csv")), 1);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn stale_manifest_is_replaced() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("manifest.json"), "stale").unwrap();
    run(&RunConfig::from_json(CLASSIFY).unwrap(), dir.path()).unwrap();
    let m: Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let files = m["files"].as_object().unwrap();
    for (name, hash) in files {
        let bytes = fs::read(dir.path().join(name)).unwrap();
        assert_eq!(hash.as_str().unwrap(), qci::output::sha256_hex(&bytes));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed), ..ProptestConfig::default() })]

    // Every requested point lands in exactly one of the two CSVs.
    #[test]
    fn no_silent_drops(xs in prop::collection::vec(-2.5f64..2.5, 1..12)) {
        let points: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
        let text = serde_json::json!({
            "model": {"type": "harmonic_oscillator", "energy": 1.0},
            "experiment": {"kind": "action", "energy": [1.0, 0.0], "points": points}
        })
        .to_string();
        let dir = tempfile::tempdir().unwrap();
        let rep = run(&RunConfig::from_json(&text).unwrap(), dir.path()).unwrap();
        let (ok, bad) = (data_rows(&dir.path().join("results.csv")), data_rows(&dir.path().join("errors.csv")));
        prop_assert_eq!(ok + bad, xs.len());
        prop_assert_eq!(rep.result_rows, ok);
        prop_assert_eq!(rep.error_rows, bad);
    }
}
