use std::path::Path;
use std::process::{Command, Output};

use surq::bench::{read_rows, Summary};
use surq::config::{parse_config, parse_config_str, OutputFormat};

fn surq(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_surq"));
    cmd.args(args).env_remove("SURQ_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL: &str = r#"{"preset": "branin-2d-a85", "sur": {"budget": 9, "cloud_size": 200, "integration_points": 30}, "replications": 2}"#;

#[test]
fn presets_are_listed() {
    let o = surq(&["presets"], &[]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in surq::config::PRESETS {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.json", "");
    let braces = write(dir.path(), "braces.json", "{}");
    let typo = write(dir.path(), "typo.json", r#"{"preset": "branin-2d-a85", "sur": {"budjet": 20}}"#);
    let unknown = write(dir.path(), "unknown.json", r#"{"preset": "nope"}"#);
    let bad_value = write(dir.path(), "bad.json", r#"{"preset": "branin-2d-a85", "experiment": {"alpha": 1.5}}"#);
    for (path, needle) in
        [(&empty, "empty"), (&braces, "empty"), (&typo, "budjet"), (&unknown, "nope"), (&bad_value, "alpha")]
    {
        let o = surq(&["run", path, "--out", dir.path().to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(1), "{path}");
        assert!(stderr(&o).contains(needle), "{path}: {}", stderr(&o));
    }
    let missing = dir.path().join("missing.json");
    assert_eq!(surq(&["run", missing.to_str().unwrap()], &[]).status.code(), Some(1));
    assert_eq!(surq(&["oracle", "nope"], &[]).status.code(), Some(1));
    assert_eq!(surq(&["frobnicate"], &[]).status.code(), Some(1));
    let small = write(dir.path(), "small.json", SMALL);
    assert_eq!(surq(&["run", &small, "--criterion", "best"], &[]).status.code(), Some(1));
    assert_eq!(surq(&["run", &small, "--replications", "0"], &[]).status.code(), Some(1));
    let o = surq(&["presets"], &[("SURQ_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("SURQ_THREADS"));
}

#[test]
fn run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let out = dir.path().join("out");
    let o = surq(&["run", &cfg, "--out", out.to_str().unwrap()], &[("SURQ_THREADS", "2")]);
    assert!(o.status.success(), "{}", stderr(&o));

    let echoed = parse_config(&out.join("branin-2d-a85.config.json")).unwrap();
    let original = parse_config_str(SMALL).unwrap();
    assert_eq!(echoed, original);

    let rows = read_rows(&out.join("branin-2d-a85.results.csv"), OutputFormat::Csv).unwrap();
    assert_eq!(rows.len(), original.expected_rows());
    assert_eq!(rows.len(), 2 * 3 * 3);
    let q = rows[0].q_true;
    for r in &rows {
        assert_eq!(r.q_true, q);
        assert_eq!(r.seed, 1 + r.replication as u64);
        assert_eq!(r.n_evaluations, 7 + r.iteration);
        assert!(r.error_percent >= 0.0);
    }

    let summary: Summary =
        serde_json::from_str(&std::fs::read_to_string(out.join("branin-2d-a85.summary.json")).unwrap()).unwrap();
    assert_eq!(summary.oracle.estimate.q_true, q);
    assert_eq!(summary.curves.len(), 3);
    assert!(summary.failures.is_empty());
    for c in &summary.curves {
        assert_eq!(c.iterations, vec![0, 1, 2]);
        for i in 0..3 {
            assert!(c.q10[i] <= c.mean[i] + 1e-12 && c.mean[i] <= c.q90[i] + 1e-12);
        }
    }

    let plot = std::fs::read_to_string(out.join("branin-2d-a85.plot.csv")).unwrap();
    assert_eq!(plot.lines().next(), Some("iteration,criterion,mean_error,q10,q90"));
    assert_eq!(plot.lines().count(), 1 + 3 * 3);
}

#[test]
fn overrides_and_jsonl_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"preset": "branin-2d-a85", "name": "tiny", "sur": {"budget": 8, "cloud_size": 100}, "output_format": "jsonl"}"#,
    );
    let out = dir.path().join("out");
    let o = surq(
        &["run", &cfg, "--out", out.to_str().unwrap(), "--criterion", "rs", "--replications", "3", "--seed", "40"],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_rows(&out.join("tiny.results.jsonl"), OutputFormat::Jsonl).unwrap();
    assert_eq!(rows.len(), 3 * 2);
    assert!(rows.iter().all(|r| r.preset == "tiny" && r.criterion.name() == "rs"));
    let seeds: Vec<u64> = rows.iter().filter(|r| r.iteration == 0).map(|r| r.seed).collect();
    assert_eq!(seeds, vec![40, 41, 42]);
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"preset": "branin-2d-a85", "sur": {"budget": 7, "cloud_size": 50}, "replications": 1}"#,
    );
    let blocker = write(dir.path(), "file", "not a directory");
    let o = surq(&["run", &cfg, "--out", &blocker, "--criterion", "rs"], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn oracle_prints_the_ground_truth() {
    let o = surq(&["oracle", "branin-2d-a85"], &[]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let q = v["q_true"].as_f64().unwrap();
    assert!(q > v["range_lo"].as_f64().unwrap() && q < v["range_hi"].as_f64().unwrap());
    assert_eq!(v["seed"].as_u64(), Some(7));
}
