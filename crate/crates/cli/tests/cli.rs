use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn surfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfc")).args(args).output().expect("spawn surfc")
}

fn json_out(args: &[&str]) -> Value {
    let out = surfc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn profile_reports_alpha_and_estimate() {
    let v = json_out(&["profile", "--gen", "ghz:n=23"]);
    assert_eq!(v["alpha"], 22);
    assert_eq!(v["g"], 22);
    assert_eq!(v["pm_estimate"], 1);
}

#[test]
fn schedule_golden_cases() {
    let v = json_out(&["schedule", "--gen", "ghz:n=23", "--model", "ls", "--chip", "min"]);
    assert_eq!(v["report"]["delta"], 22);
    assert_eq!(v["report"]["valid"], true);
    let v = json_out(&["schedule", "--gen", "bv:n=10", "--model", "dd", "--chip", "min"]);
    assert_eq!(v["report"]["delta"], 5);
    assert_eq!(v["schedule"]["delta"], 5);
}

#[test]
fn qasm_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bell.qasm");
    fs::write(&path, "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[3];\nh q[0];\ncx q[0],q[1];\ncx q[1],q[2];\n").unwrap();
    let v = json_out(&["profile", path.to_str().unwrap()]);
    assert_eq!(v["n"], 3);
    assert_eq!(v["alpha"], 2);
    let v = json_out(&["schedule", path.to_str().unwrap(), "--model", "ls"]);
    assert_eq!(v["report"]["circuit"], "bell");
    assert_eq!(v["report"]["delta"], 2);
}

#[test]
fn chip_and_map_describe_the_layout() {
    let v = json_out(&["chip", "describe", "--gen", "qft:n=6", "--chip", "4x", "--mapping", "snake"]);
    assert_eq!(v["rows"], 2);
    assert_eq!(v["cols"], 3);
    assert_eq!(v["row_channels"].as_array().unwrap().len(), 3);
    assert_eq!(v["col_channels"].as_array().unwrap().len(), 4);
    let b = v["bandwidth"].as_u64().unwrap();
    assert_eq!(v["capacity"].as_u64().unwrap(), (b - 1) / 2 + 3);

    let v = json_out(&["map", "--gen", "ghz:n=4", "--mapping", "snake"]);
    let tiles: Vec<(u64, u64)> =
        v.as_array().unwrap().iter().map(|e| (e["row"].as_u64().unwrap(), e["col"].as_u64().unwrap())).collect();
    assert_eq!(tiles, [(0, 0), (0, 1), (1, 1), (1, 0)]);
    assert!(v.as_array().unwrap().iter().all(|e| e["cut"] == "X" || e["cut"] == "Z"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "model = \"dd\"\nscheduler = \"time-first\"\n[circuit]\ngenerator = \"ghz\"\nn = 6\n").unwrap();
    let v = json_out(&["schedule", "--config", cfg.to_str().unwrap()]);
    assert_eq!(v["report"]["scheduler"], "time-first");
    assert_eq!(v["report"]["model"], "dd");
    let v = json_out(&["schedule", "--config", cfg.to_str().unwrap(), "--model", "ls", "--chip", "bw2", "--scheduler", "resu"]);
    assert_eq!(v["report"]["scheduler"], "resu");
    assert_eq!(v["report"]["model"], "ls");
}

#[test]
fn csv_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("row.csv");
    let o = surfc(&["schedule", "--gen", "ghz:n=5", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().next().unwrap().contains("delta"));
}

#[test]
fn compare_reports() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let run = |sched: &str, path: &std::path::Path| {
        let o = surfc(&["schedule", "--gen", "qft:n=5", "--scheduler", sched, "--out", path.to_str().unwrap()]);
        assert!(o.status.success());
    };
    run("channel-first", &a);
    run("ecmas", &b);
    let v = json_out(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    let (da, db) = (v["delta_a"].as_f64().unwrap(), v["delta_b"].as_f64().unwrap());
    let expect = ((da - db) / da * 1000.0).round() / 10.0;
    assert_eq!(v["reduction_percent"].as_f64().unwrap(), expect);

    let c = dir.path().join("c.json");
    assert!(surfc(&["schedule", "--gen", "qft:n=4", "--out", c.to_str().unwrap()]).status.success());
    let o = surfc(&["compare", a.to_str().unwrap(), c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different circuits"));
}

#[test]
fn sweep_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    fs::write(
        &plan,
        "seeds = [1, 2]\nchips = [\"min\", \"bw2\"]\n[base]\nmodel = \"ls\"\n[base.circuit]\ngenerator = \"random\"\nn = 9\ndepth = 4\nparallelism = 2\n",
    )
    .unwrap();
    let rows = dir.path().join("rows.csv");
    let summary = dir.path().join("summary.csv");
    let o = surfc(&[
        "sweep",
        "--config",
        plan.to_str().unwrap(),
        "--out",
        rows.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
        "--timing-runs",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&rows).unwrap().lines().count(), 5);
    assert_eq!(fs::read_to_string(&summary).unwrap().lines().count(), 3);
}

#[test]
fn exit_codes() {
    // usage
    assert_eq!(surfc(&["schedule"]).status.code(), Some(1));
    assert_eq!(surfc(&["schedule", "--gen", "ghz:n=3", "--model", "xx"]).status.code(), Some(1));
    assert_eq!(surfc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(surfc(&["--help"]).status.code(), Some(0));
    // infeasible: ReSu forced onto a chip without enough capacity
    let o = surfc(&["schedule", "--gen", "random:n=16,depth=4,parallelism=8", "--chip", "min", "--scheduler", "resu"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    // infeasible: nothing routes on a lattice-surgery chip with no channels
    let o = surfc(&["schedule", "--gen", "qft:n=9", "--model", "ls", "--chip", "bw0", "--mapping", "snake"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn oracle_answers_and_refuses() {
    let v = json_out(&["oracle", "--gen", "ghz:n=4"]);
    assert_eq!(v["alpha"], 3);
    assert_eq!(v["optimal"], 3);
    assert!(v["heuristic"].as_u64().unwrap() >= 3);
    let o = surfc(&["oracle", "--gen", "qft:n=8"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds the oracle budget"));
}
