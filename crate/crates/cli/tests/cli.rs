use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[model]
kind = "coloring"
q = 6
[graph]
kind = "random-regular"
n = 20
degree = 3
seed = 2
[chain]
horizon = 5.0
[scheduler]
kinds = ["adversarial"]
[experiment]
seed_start = 1
seed_count = 10
"#;

fn asyncmh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asyncmh"))
        .args(args)
        .env("ASYNCMH_WORKERS", "1")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn run_writes_one_row_per_seed_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", CONFIG);
    let first = asyncmh(&["run", &cfg]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let text = stdout(&first);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 11);
    assert!(lines[0].starts_with("seed,scheduler,n,"));
    assert!(lines[1].starts_with("1,adversarial,20,"));

    let second = asyncmh(&["--workers", "3", "run", &cfg]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn run_writes_finals_and_traces_that_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &CONFIG.replace("seed_count = 10", "seed_count = 2"));
    let csv = dir.path().join("rows.csv");
    let finals = dir.path().join("finals.txt");
    let traces = dir.path().join("traces");
    let out = asyncmh(&[
        "run",
        &cfg,
        "--out",
        csv.to_str().unwrap(),
        "--finals",
        finals.to_str().unwrap(),
        "--trace-dir",
        traces.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let finals = fs::read_to_string(finals).unwrap();
    assert_eq!(finals.lines().count(), 2);
    assert_eq!(finals.lines().next().unwrap().split_whitespace().count(), 22);

    let rows = fs::read_to_string(csv).unwrap();
    let row: Vec<&str> = rows.lines().nth(1).unwrap().split(',').collect();
    let replay = asyncmh(&["replay-trace", traces.join("trace-1-adversarial.txt").to_str().unwrap()]);
    assert!(replay.status.success());
    let text = stdout(&replay);
    let stats: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    // makespan, phase1_end, max_residence, messages
    let num = |s: &str| s.parse::<f64>().unwrap();
    for (a, b) in [(0, 6), (1, 7), (2, 8), (3, 10)] {
        assert_eq!(num(stats[a]), num(row[b]), "column {b}");
    }
}

#[test]
fn verify_coupling_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &CONFIG.replace(r#"kinds = ["adversarial"]"#, r#"kinds = ["synchronous", "uniform", "adversarial", "fixed"]"#),
    );
    let out = asyncmh(&["verify-coupling", &cfg]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "coupling ok: 40 runs");
}

#[test]
fn dump_schedule_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", CONFIG);
    let out = asyncmh(&["dump-schedule", &cfg, "--seed", "7"]);
    assert!(out.status.success());
    let exp = asyncmh_core::harness::Experiment::from_config(asyncmh_core::harness::Config::from_toml(CONFIG).unwrap()).unwrap();
    assert_eq!(stdout(&out), exp.schedule(7).unwrap().to_text());
}

#[test]
fn tv_test_prints_a_distance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[model]\nkind = \"ising\"\nbeta = 0.2\n[graph]\nkind = \"path\"\nn = 3\n[chain]\nhorizon = 10.0\n",
    );
    let out = asyncmh(&["tv-test", &cfg, "--runs", "200"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let fields: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(fields[0], "200");
    let tv: f64 = fields[1].parse().unwrap();
    assert!((0.0..1.0).contains(&tv));
    assert_eq!(fields[2], "8");
}

#[test]
fn tv_test_refuses_huge_state_spaces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", CONFIG);
    let out = asyncmh(&["tv-test", &cfg, "--runs", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_prints_summary_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &CONFIG.replace("n = 20\n", "").replace("seed_count = 10", "seed_count = 3\nsizes = [16, 32]"),
    );
    let rows = dir.path().join("rows.csv");
    let out = asyncmh(&["sweep", &cfg, "--rows", rows.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("R^2"));
    assert_eq!(fs::read_to_string(rows).unwrap().lines().count(), 7);
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing_graph = write_config(
        dir.path(),
        "c.toml",
        "[model]\nkind = \"ising\"\nbeta = 0.2\n[graph]\nkind = \"file\"\npath = \"nope.txt\"\n[chain]\nhorizon = 1.0\n",
    );
    assert_eq!(asyncmh(&["run", &missing_graph]).status.code(), Some(2));
    assert_eq!(asyncmh(&["run", "/nonexistent/config.toml"]).status.code(), Some(2));
    let garbage = dir.path().join("t.txt");
    fs::write(&garbage, "not a trace").unwrap();
    assert_eq!(asyncmh(&["replay-trace", garbage.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn graph_files_resolve_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.txt"), "0 1\n1 2\n2 3\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[model]\nkind = \"hardcore\"\nlambda = 0.5\n[graph]\nkind = \"file\"\npath = \"g.txt\"\n[chain]\nhorizon = 2.0\n",
    );
    let out = asyncmh(&["run", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).lines().nth(1).unwrap().starts_with("1,adversarial,4,2,0.5,"));
}
