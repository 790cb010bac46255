use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn quasi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasi"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn quasi")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

fn output_digests(manifest: &Value) -> Vec<(String, String)> {
    manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["path"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn spin_preset_writes_one_file_per_spin() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "gen.json", r#"{"seed": 11, "steps": 200, "spin_array": {"m": 8, "pure": 3}}"#);
    let o = quasi(dir.path(), &["generate", "--config", "gen.json", "--out", "g"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let files = fs::read_dir(dir.path().join("g/trajectories")).unwrap().count();
    assert_eq!(files, 8);
    let index = json(&dir.path().join("g/trajectories.json"));
    assert_eq!(index.as_array().unwrap().len(), 8);
    let pure = index
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["generator"]["kind"] == "constant-pure")
        .count();
    assert_eq!(pure, 3);
    for f in ["config.input.json", "config.resolved.json", "manifest.json"] {
        assert!(dir.path().join("g").join(f).exists(), "{f}");
    }
}

#[test]
fn same_seed_same_checksums() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "gen.json",
        r#"{"seed": 5, "steps": 300, "trajectories": [
            {"name": "fast", "dim": 4, "generator": {"kind": "random-fast", "t_c": 3.0}}],
            "spin_array": {"m": 4, "pure": 1}}"#,
    );
    for out in ["a", "b"] {
        let o = quasi(dir.path(), &["generate", "--config", "gen.json", "--out", out, "--threads", "2"]);
        assert_eq!(code(&o), 0);
    }
    let a = output_digests(&json(&dir.path().join("a/manifest.json")));
    let b = output_digests(&json(&dir.path().join("b/manifest.json")));
    assert_eq!(a, b);

    let o = quasi(dir.path(), &["generate", "--config", "gen.json", "--out", "c", "--seed", "6"]);
    assert_eq!(code(&o), 0);
    let c = output_digests(&json(&dir.path().join("c/manifest.json")));
    let fast = |v: &[(String, String)]| v.iter().find(|(p, _)| p.ends_with("fast.csv")).unwrap().1.clone();
    assert_ne!(fast(&a), fast(&c));
}

#[test]
fn zero_dimension_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "gen.json",
        r#"{"steps": 10, "trajectories": [{"name": "x", "dim": 0, "generator": {"kind": "constant-pure", "k": 0}}]}"#,
    );
    let o = quasi(dir.path(), &["generate", "--config", "gen.json", "--out", "g"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn bad_config_and_missing_file_codes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "gen.json", r#"{"steps": 10, "colour": 1}"#);
    let o = quasi(dir.path(), &["generate", "--config", "gen.json", "--out", "g"]);
    assert_eq!(code(&o), 2);
    let o = quasi(dir.path(), &["generate", "--config", "absent.json", "--out", "g"]);
    assert_eq!(code(&o), 3);
    let o = quasi(dir.path(), &["frobnicate"]);
    assert_eq!(code(&o), 2);

    write(dir.path(), "ok.json", r#"{"steps": 10, "spin_array": {"m": 2, "pure": 1}}"#);
    write(dir.path(), "blocker", "");
    let o = quasi(dir.path(), &["generate", "--config", "ok.json", "--out", "blocker/out"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn pure_and_balanced_projection() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "gen.json",
        r#"{"steps": 200, "trajectories": [
            {"name": "pure", "dim": 3, "generator": {"kind": "constant-pure", "k": 2}},
            {"name": "even", "dim": 3, "generator": {"kind": "balanced-superposition"}}]}"#,
    );
    assert_eq!(code(&quasi(dir.path(), &["generate", "--config", "gen.json", "--out", "g"])), 0);
    write(dir.path(), "proj.json", r#"{"index": "g/trajectories.json", "window_len": 40}"#);
    let o = quasi(dir.path(), &["project", "--config", "proj.json", "--out", "p"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let mut rdr = csv::Reader::from_path(dir.path().join("p/quasi_states.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (mut pure, mut even) = (0, 0);
    for row in rdr.records() {
        let row = row.unwrap();
        match &row[col("trajectory")] {
            "pure" => {
                pure += 1;
                assert_eq!(&row[col("null")], "false");
                assert_eq!(&row[col("components")], "2:1");
            }
            "even" => {
                even += 1;
                assert_eq!(&row[col("null")], "true");
            }
            other => panic!("unexpected {other}"),
        }
    }
    assert_eq!((pure, even), (5, 5));
    assert!(dir.path().join("p/array.csv").exists());

    let o = quasi(dir.path(), &["project", "--config", "proj.json", "--out", "p2", "--threads", "3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        output_digests(&json(&dir.path().join("p/manifest.json"))),
        output_digests(&json(&dir.path().join("p2/manifest.json")))
    );
}

#[test]
fn born_report_within_three_sigma() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "born.json",
        r#"{"powers": [0.6, 0.4], "monte_carlo": {"trials": 4000, "seed": 9}, "counter_denominator": 5}"#,
    );
    let o = quasi(dir.path(), &["born", "--config", "born.json", "--out", "b"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("b/born_report.json"));
    let analytic: Vec<f64> = serde_json::from_value(r["analytic"].clone()).unwrap();
    assert!((analytic[1] - 0.6).abs() < 1e-12 && (analytic[2] - 0.4).abs() < 1e-12);
    assert!(r["within_three_sigma"].as_array().unwrap().iter().all(|b| b == true));
    assert_eq!(r["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum::<u64>(), 4000);
    assert_eq!(r["counter"]["counts"], serde_json::json!([0, 3, 2]));
}

const COMM: &str = r#"{"seed": 2, "channel": {"pointer_count": 2, "ticks": 40, "alice_tag": "a1",
  "schedule": {"1": "ready", "11": {"outcome": 1}, "21": "ready", "31": {"outcome": 0}},
  "noise": [{"name": "n0", "tag": "b0", "drive": "random", "machine_seed": 1},
            {"name": "n1", "tag": "b1", "drive": "mirror", "machine_seed": 2},
            {"name": "n2", "tag": "b2", "drive": "random", "machine_seed": 3}],
  "criterion": {"sender": "A", "tag": "a1"}}}"#;

#[test]
fn comm_and_replay_agree_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "comm.json", COMM);
    let o = quasi(dir.path(), &["comm", "--config", "comm.json", "--out", "c"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let records = fs::read_to_string(dir.path().join("c/records.csv")).unwrap();
    assert_eq!(records, "sender,content,time\nA,ready,1\nA,P1,11\nA,ready,21\nA,P0,31\n");
    let report = json(&dir.path().join("c/comm_report.json"));
    assert_eq!(report["alice_rule_violations"], serde_json::json!([]));

    let o = quasi(
        dir.path(),
        &["replay", "--config", "comm.json", "--transcript", "c/transcript.jsonl", "--out", "r"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["transcript.jsonl", "records.csv", "histogram.json"] {
        assert_eq!(fs::read(dir.path().join("c").join(f)).unwrap(), fs::read(dir.path().join("r").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn consistency_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cons.json", r#"{"mode": "scenario", "seed": 8, "scenario": {"cycles": 4}}"#);
    let o = quasi(dir.path(), &["consistency", "--config", "cons.json", "--out", "ok"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("ok/consistency_report.json"));
    assert_eq!(report["violations"], serde_json::json!([]));

    // Claim a pointer in a waiting window where the apparatus recorded none
    // and the observer holds "ready".
    let mut m = json(&dir.path().join("ok/measurement.json"));
    let apparatus = m["apparatus"].as_array_mut().unwrap();
    assert!(apparatus[0].is_null());
    apparatus[0] = serde_json::json!(0);
    let body = serde_json::json!({"mode": "measurement", "measurement": m});
    write(dir.path(), "bad.json", &body.to_string());
    let o = quasi(dir.path(), &["consistency", "--config", "bad.json", "--out", "bad"]);
    assert_eq!(code(&o), 5);
    let report = json(&dir.path().join("bad/consistency_report.json"));
    let v = &report["violations"][0];
    assert_eq!(v["leg"], "pointer");
    assert_eq!(v["windows"], serde_json::json!([0]));
}
