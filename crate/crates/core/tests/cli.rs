use std::path::Path;
use std::process::{Command, Output};

use boxes_core::FieldFile;
use tempfile::TempDir;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boxes-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn single_probability_prints_four_digits() {
    let o = sim(&["probability", "--formulation", "cf", "--box", "b1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "0.4310\n");
}

#[test]
fn probability_table_and_json() {
    let o = sim(&["probability"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(
        text.contains("P_c(B1) = 0.4310") && text.contains("P_t(B2) = 0.4310"),
        "{text}"
    );

    let o = sim(&["probability", "--json", "--formulation", "tsf"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let results = doc["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for r in results {
        assert_eq!(r["formulation"], "tsf");
        assert!((r["probability"].as_f64().unwrap() - 0.431).abs() < 1e-3);
    }
    assert_eq!(doc["grid"]["n"], 1024);
}

#[test]
fn full_precision_flag() {
    let o = sim(&["probability", "--formulation", "tsf", "--box", "b2", "--full-precision"]);
    let p: f64 = stdout(&o).trim().parse().unwrap();
    assert!((p - 25.0 / 58.0).abs() < 1e-9);
    assert!(stdout(&o).trim().len() > 8);
}

#[test]
fn sample_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = sim(&["sample", "-n", "20000", "--seed", "17", "--out", path(d)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["runs.ndjson", "summary.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let log = std::fs::read_to_string(a.join("runs.ndjson")).unwrap();
    assert_eq!(log.lines().count(), 20000);
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["run_id"], 0);
    assert_eq!(first["seed"], 17);
    assert_eq!(first["renormalized"], false);

    let s1 = sim(&["sample", "-n", "500", "--seed", "3"]);
    let s2 = sim(&["sample", "-n", "500", "--seed", "3"]);
    assert_eq!(s1.stdout, s2.stdout);
    let s3 = sim(&["sample", "-n", "500", "--seed", "4"]);
    assert_ne!(s1.stdout, s3.stdout);
}

#[test]
fn sample_without_seed_reports_it() {
    let o = sim(&["sample", "-n", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let err = stderr(&o);
    let seed: u64 = err.trim().strip_prefix("seed: ").unwrap().parse().unwrap();
    let again = sim(&["sample", "-n", "10", "--seed", &seed.to_string()]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn renormalized_sampling_has_no_misses() {
    let o = sim(&[
        "sample",
        "-n",
        "5000",
        "--seed",
        "1",
        "--formulation",
        "tsf",
        "--renormalize-outcomes",
        "--json",
    ]);
    let text = stdout(&o);
    let summary: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(summary["renormalized_outcomes"], true);
    let miss = summary["outcomes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["outcome"] == "no_detection")
        .unwrap();
    assert_eq!(miss["count"], 0);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["renormalized"], true);
    assert!((first["p_b1"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn snapshots_round_trip_and_repeat() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = sim(&[
            "snapshot",
            "--formulation",
            "tsf",
            "--final-box",
            "b2",
            "--out",
            path(d),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for t in [0, 1000, 3000, 4000] {
        for ext in ["grid", "pgm"] {
            let name = format!("tsf_{t}.{ext}");
            let bytes = std::fs::read(a.join(&name)).unwrap();
            assert_eq!(bytes, std::fs::read(b.join(&name)).unwrap(), "{name}");
        }
        let grid_path = a.join(format!("tsf_{t}.grid"));
        let file = FieldFile::load(&grid_path).unwrap();
        assert_eq!(file.time, t as f64);
        let mut again = Vec::new();
        file.write_grid(&mut again).unwrap();
        assert_eq!(again, std::fs::read(&grid_path).unwrap());
        let pgm = std::fs::read(a.join(format!("tsf_{t}.pgm"))).unwrap();
        assert!(pgm.starts_with(b"P5\n"));
        assert!(pgm.iter().skip(15).any(|&v| v == 255));
    }
}

#[test]
fn tsf_snapshot_needs_final_box() {
    let dir = TempDir::new().unwrap();
    let o = sim(&["snapshot", "--formulation", "tsf", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("final"));
}

#[test]
fn coarse_grid_reports_aliasing() {
    let o = sim(&["verify", "--grid", "64"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("aliasing"), "{}", stderr(&o));
}

#[test]
fn adjoint_check_passes() {
    let o = sim(&["verify", "--dt", "4000", "--check", "overlap-invariance", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["passed"], true);
    assert!(doc["checks"][0]["measured"].as_f64().unwrap() < 1e-10);
}

#[test]
fn failing_check_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, "[grid]\nn = 512\nextent = 512.0\n").unwrap();
    let o = sim(&["--config", path(&cfg), "verify", "--check", "oracle-equivalence"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn config_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[physics]\nmass = -1.0\n").unwrap();
    let o = sim(&["--config", path(&cfg), "probability"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("physics.mass"), "{}", stderr(&o));

    std::fs::write(&cfg, "[physics]\nsigmaa = 3.0\n").unwrap();
    let o = sim(&["--config", path(&cfg), "probability"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sigmaa"), "{}", stderr(&o));

    let o = sim(&["--config", path(&dir.path().join("missing.toml")), "probability"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_overrides_apply() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("narrow.toml");
    std::fs::write(&cfg, "[physics]\nsigma = 25.0\n").unwrap();
    let o = sim(&[
        "--config",
        path(&cfg),
        "probability",
        "--formulation",
        "cf",
        "--box",
        "b1",
        "--full-precision",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let p: f64 = stdout(&o).trim().parse().unwrap();
    // t / (4σ²) = 4000 / 2500
    assert!((p - 0.5 / (1.0 + 1.6f64.powi(2))).abs() < 1e-6, "{p}");
}

#[test]
fn unwritable_output_is_an_io_failure() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = sim(&["sample", "-n", "5", "--seed", "1", "--out", path(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(sim(&["probability", "--formulation", "xx"]).status.code(), Some(1));
    assert_eq!(sim(&[]).status.code(), Some(1));
    assert_eq!(sim(&["--help"]).status.code(), Some(0));
}

#[test]
fn thread_cap_does_not_change_results() {
    let capped = Command::new(env!("CARGO_BIN_EXE_boxes-sim"))
        .env("BOXES_SIM_THREADS", "1")
        .args(["probability", "--full-precision", "--json"])
        .output()
        .unwrap();
    let free = sim(&["probability", "--full-precision", "--json"]);
    assert_eq!(capped.stdout, free.stdout);
}
