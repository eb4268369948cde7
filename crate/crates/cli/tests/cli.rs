use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eventclock_cli::parse_csv;
use eventclock_core::repeated::{detection_distribution, DetectionSchedule};
use eventclock_core::spin::{self, SpinExampleConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eventclock"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(experiment: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(experiment)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    parse_csv(&std::fs::read_to_string(path).unwrap()).expect("numeric CSV")
}

#[test]
fn detect_eighth_period_halves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("detect.csv");
    let o = run("detect", &configs_dir().join("detect.json"), &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["k", "t", "p_detect", "survival"]);
    let expected = [0.5, 0.25, 0.125, 0.0625, 0.03125];
    assert_eq!(rows.len(), 5);
    for (row, want) in rows.iter().zip(expected) {
        assert!((row[2] - want).abs() <= 1e-10);
        assert!((row[3] - want).abs() <= 1e-10);
    }
}

#[test]
fn zeno_rows_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zeno.csv");
    let o = run("zeno-sweep", &configs_dir().join("zeno-sweep.json"), &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["k", "delta", "survival_at_tau", "delta_e", "resolvability"]);
    let by_k = |k: f64| rows.iter().find(|r| r[0] == k).unwrap()[2];
    assert!((by_k(10.0) - 0.0144).abs() < 1e-3);
    assert!((by_k(100.0) - 0.6737).abs() < 1e-3);
    assert!((by_k(1000.0) - 0.9613).abs() < 1e-3);
    // Δ = T/4 sits above the 1/dE threshold
    let four = rows.iter().find(|r| r[0] == 4.0).unwrap();
    assert!(four[4] >= 1.0);
}

#[test]
fn nonpositive_delta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    for delta in ["0", "-0.1"] {
        let cfg = write_config(dir.path(), "bad.json", &format!(r#"{{"delta": {delta}, "k_max": 5}}"#));
        let o = run("detect", &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));
        assert!(!out.exists());
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let cases = [
        ("detect", r#"{"delta": 0.1}"#, "k_max"),
        ("detect", r#"{"delta": 0.1, "k_max": 3, "shots": 10}"#, "seed"),
        ("detect", r#"{"delta": 0.1, "k_max": 3, "bogus": 1}"#, "bogus"),
        ("zeno-sweep", r#"{"tau": 1, "k_values": [10, 0]}"#, "k_values"),
        ("zeno-sweep", r#"{"experiment": "detect", "tau": 1, "k_values": [1]}"#, "experiment"),
        ("spin-run", r#"{"t_end": 1, "n_points": 2}"#, "n_points"),
        ("spin-run", r#"{"t_end": 1, "n_points": 10, "a": 1, "b": 1}"#, "b"),
        ("commutators", r#"{"t1": [0.1], "t2": [0.1]}"#, "t2"),
        ("arrival-evolve", r#"{"t_end": 5, "n_times": 3, "grid_points": 1000}"#, "grid_points"),
        ("arrival-backflow", r#"{"t_end": 1, "n_times": 3, "w_values": [1.5]}"#, "w_values"),
    ];
    for (exp, body, key) in cases {
        let cfg = write_config(dir.path(), "bad.json", body);
        let o = run(exp, &cfg, &out, &[]);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(2), "{exp} {body}: {err}");
        assert!(err.contains(key), "{exp} {body}: {err}");
        assert!(!out.exists());
    }
}

#[test]
fn unreadable_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let o = run("detect", &dir.path().join("missing.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), "broken.json", "{not json");
    assert_eq!(run("detect", &cfg, &out, &[]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn boundary_leak_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let cfg = write_config(
        dir.path(),
        "leak.json",
        r#"{"grid_points": 2048, "x_min": -64, "x_max": 64, "t_end": 60, "n_times": 7}"#,
    );
    let o = run("arrival-evolve", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn csv_round_trips_to_library_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("detect.csv");
    let cfg = write_config(dir.path(), "d.json", r#"{"a": 0.6, "b": [0, 0.8], "delta": 0.03, "k_max": 40}"#);
    assert!(run("detect", &cfg, &out, &[]).status.success());
    let (_, rows) = read_csv(&out);

    let model = spin::build(&SpinExampleConfig {
        a: eventclock_core::C64::new(0.6, 0.0),
        b: eventclock_core::C64::new(0.0, 0.8),
        ..Default::default()
    })
    .unwrap();
    let sched = DetectionSchedule::with_default_floor(0.03, 40).unwrap();
    let dist = detection_distribution(&model.spec, &model.hamiltonian, &model.psi0, &sched).unwrap();
    assert_eq!(rows.len(), dist.len());
    let close = |a: f64, b: f64| a == b || (a - b).abs() <= 5e-12 * b.abs();
    for (j, row) in rows.iter().enumerate() {
        assert_eq!(row[0], (j + 1) as f64);
        assert!(close(row[1], dist.times[j]));
        assert!(close(row[2], dist.p_detect[j]));
        assert!(close(row[3], dist.survival[j]));
    }
}

#[test]
fn sampling_mode_adds_column_and_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let cfg = configs_dir().join("detect-sampled.json");
    assert!(run("detect", &cfg, &a, &[]).status.success());
    assert!(run("detect", &cfg, &b, &[]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (header, rows) = read_csv(&a);
    assert_eq!(header, ["k", "t", "p_detect", "survival", "empirical"]);
    for r in &rows {
        let sigma = (r[2] * (1.0 - r[2]) / 100_000.0).sqrt();
        assert!((r[4] - r[2]).abs() < 5.0 * sigma + 1e-9);
    }
}

#[test]
fn every_shipped_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let expected = [
        ("spin-run", "t,p_m,m"),
        ("zeno-sweep", "k,delta,survival_at_tau,delta_e,resolvability"),
        ("detect", "k,t,p_detect,survival"),
        ("commutators", "t1,t2,same_time_norm,two_time_norm"),
        ("arrival-evolve", "t,p_plus,j_origin"),
        ("arrival-backflow", "p1,p2,s1,s2,w,phi,t_star,j_min"),
    ];
    for (exp, header) in expected {
        let out = dir.path().join(format!("{exp}.csv"));
        let o = run(exp, &configs_dir().join(format!("{exp}.json")), &out, &[]);
        assert!(o.status.success(), "{exp}: {}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().next(), Some(header));
        assert!(parse_csv(&text).is_some());
    }
}

#[test]
fn commutator_and_backflow_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    assert!(run("commutators", &configs_dir().join("commutators.json"), &out, &[]).status.success());
    let (_, rows) = read_csv(&out);
    assert!((rows[0][3] - 0.5).abs() < 1e-11);
    assert!(rows.iter().all(|r| r[2] <= 1e-12));

    let out = dir.path().join("b.csv");
    assert!(run("arrival-backflow", &configs_dir().join("arrival-backflow.json"), &out, &[]).status.success());
    let (_, rows) = read_csv(&out);
    let r = &rows[0];
    assert_eq!((r[4], r[6]), (0.3, 0.0));
    assert!((r[5] - std::f64::consts::PI).abs() < 1e-11);
    assert!(r[7] < -1e-4);
}

#[test]
fn json_format_carries_columns_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let o = run("detect", &configs_dir().join("detect.json"), &out, &["--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["experiment"], "detect");
    assert_eq!(v["columns"][2], "p_detect");
    let p: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r[2].as_f64().unwrap()).collect();
    assert!((p[0] - 0.5).abs() < 1e-12 && (p[4] - 0.03125).abs() < 1e-12);
}

#[test]
fn bad_arguments_exit_two() {
    let o = bin().args(["not-an-experiment", "--config", "x.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["detect"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
