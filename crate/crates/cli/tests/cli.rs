use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn kgroup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgroup"))
        .args(args)
        .env_remove("KGROUP_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_k4_maxcut_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let result = dir.path().join("r.json");
    let k4 = fixture("k4.edges");
    let out = kgroup(&[
        "solve",
        "--problem",
        "maxcut",
        "--input",
        s(&k4),
        "--epochs",
        "3000",
        "--restarts",
        "10",
        "--seed",
        "7",
        "--output",
        s(&result),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&result);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["metrics"]["cut"], 4);
    assert_eq!(r["seed"], 7);
    assert_eq!(r["config"]["train"]["epochs"], 3000);

    let oracle = kgroup(&["oracle", "--problem", "maxcut", "--input", s(&k4)]);
    assert_eq!(code(&oracle), 0);
    assert_eq!(json_stdout(&oracle)["value"], r["objective"]);
}

#[test]
fn solve_toy_hypergraph_proper_coloring() {
    let out = kgroup(&[
        "solve",
        "--problem",
        "proper-coloring",
        "--input",
        s(&fixture("toy.hgr")),
        "--kmax",
        "2",
    ]);
    assert_eq!(code(&out), 0);
    let r = json_stdout(&out);
    assert_eq!(r["feasible"], true);
    assert_eq!(r["metrics"]["colors"], 2);
    assert_eq!(r["k"], 2);
}

#[test]
fn infeasible_best_exits_two() {
    let out = kgroup(&[
        "solve",
        "--problem",
        "graph-coloring",
        "--input",
        s(&fixture("k4.edges")),
        "--k",
        "2",
        "--epochs",
        "200",
    ]);
    assert_eq!(code(&out), 2);
    assert_eq!(json_stdout(&out)["feasible"], false);
}

#[test]
fn missing_input_exits_one_with_diagnostic() {
    let out = kgroup(&["solve", "--problem", "maxcut", "--input", "no/such/file.edges"]);
    assert_eq!(code(&out), 1);
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no/such/file.edges"));
}

#[test]
fn malformed_instance_exits_one() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.hgr");
    std::fs::write(&bad, "2 3\n1 2\n").unwrap();
    let out = kgroup(&["solve", "--problem", "hypergraph-partitioning", "--input", s(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn verify_round_trip_corruption_and_mismatch() {
    let dir = TempDir::new().unwrap();
    let petersen = fixture("petersen.edges");
    let result = dir.path().join("r.json");
    let out = kgroup(&[
        "solve",
        "--problem",
        "graph-coloring",
        "--input",
        s(&petersen),
        "--epochs",
        "1500",
        "--seed",
        "3",
        "--output",
        s(&result),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stored = read_json(&result);

    let ok = kgroup(&[
        "verify",
        "--problem",
        "graph-coloring",
        "--input",
        s(&petersen),
        "--solution",
        s(&result),
    ]);
    assert_eq!(code(&ok), 0);
    let report = json_stdout(&ok);
    assert_eq!(report["stored_metrics_match"], true);
    assert_eq!(report["violated_terms"], stored["metrics"]["violated_terms"]);
    assert_eq!(report["b1"], stored["metrics"]["b1"]);

    // move vertex 0 into the color of its neighbor 1
    let mut groups: Vec<u64> = serde_json::from_value(stored["assignment"].clone()).unwrap();
    groups[0] = groups[1];
    let corrupted = dir.path().join("bad.json");
    std::fs::write(&corrupted, serde_json::to_string(&groups).unwrap()).unwrap();
    let bad = kgroup(&[
        "verify",
        "--problem",
        "graph-coloring",
        "--input",
        s(&petersen),
        "--solution",
        s(&corrupted),
        "--k",
        "4",
    ]);
    assert_eq!(code(&bad), 2);
    assert!(json_stdout(&bad)["violated_terms"].as_u64().unwrap() >= 1);

    let short = dir.path().join("short.json");
    std::fs::write(&short, "[0, 1, 2]").unwrap();
    let wrong = kgroup(&[
        "verify",
        "--problem",
        "graph-coloring",
        "--input",
        s(&petersen),
        "--solution",
        s(&short),
    ]);
    assert_eq!(code(&wrong), 1);
}

#[test]
fn oracle_coloring_examples() {
    let triangle = kgroup(&[
        "oracle",
        "--problem",
        "graph-coloring",
        "--input",
        s(&fixture("triangle.edges")),
    ]);
    assert_eq!(code(&triangle), 0);
    assert_eq!(json_stdout(&triangle)["value"], 3.0);

    let petersen = kgroup(&[
        "oracle",
        "--problem",
        "graph-coloring",
        "--input",
        s(&fixture("petersen.edges")),
    ]);
    assert_eq!(code(&petersen), 0);
    let r = json_stdout(&petersen);
    assert_eq!(r["value"], 3.0);
    assert_eq!(r["report"]["violated_terms"], 0);
}

#[test]
fn oracle_over_limit_names_required_limit() {
    let out = kgroup(&[
        "oracle",
        "--problem",
        "maxcut",
        "--input",
        s(&fixture("petersen.edges")),
        "--limit",
        "100",
    ]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--limit 512"), "{err}");
}

#[test]
fn empty_sweep_writes_headers_only() {
    let dir = TempDir::new().unwrap();
    let summary = dir.path().join("summary.csv");
    let out = kgroup(&[
        "bench",
        "--sweep",
        s(&fixture("empty-sweep.json")),
        "--summary",
        s(&summary),
    ]);
    assert_eq!(code(&out), 0);
    let runs = String::from_utf8(out.stdout).unwrap();
    assert_eq!(runs.lines().count(), 1);
    assert!(runs.starts_with("config,problem,generator,"));
    assert_eq!(std::fs::read_to_string(&summary).unwrap().lines().count(), 1);
}

#[test]
fn ablation_sweep_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let summary = dir.path().join("summary.csv");
    let sweep = fixture("ablation-sweep.json");
    let first = kgroup(&["bench", "--sweep", s(&sweep), "--summary", s(&summary)]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let second = kgroup(&["bench", "--sweep", s(&sweep)]);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(String::from_utf8_lossy(&first.stdout).lines().count(), 1 + 6);
    let aggregates = std::fs::read_to_string(&summary).unwrap();
    let rows: Vec<&str> = aggregates.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("annealed,maxcut,3,3,"));
    assert!(rows[1].starts_with("plain,maxcut,3,3,"));
}

#[test]
fn invalid_sweep_exits_one() {
    let dir = TempDir::new().unwrap();
    let sweep = dir.path().join("sweep.json");
    std::fs::write(&sweep, r#"{"generators": [{"kind": "lattice"}]}"#).unwrap();
    assert_eq!(code(&kgroup(&["bench", "--sweep", s(&sweep)])), 1);
}

#[test]
fn generate_is_seeded_and_parseable() {
    let dir = TempDir::new().unwrap();
    let a = kgroup(&["generate", "er", "--vertices", "12", "--edges", "12", "--seed", "5"]);
    let b = kgroup(&["generate", "er", "--vertices", "12", "--edges", "12", "--seed", "5"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let path = dir.path().join("h.hgr");
    let out = kgroup(&[
        "generate",
        "hypergraph",
        "--vertices",
        "9",
        "--edges",
        "6",
        "--seed",
        "1",
        "--output",
        s(&path),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("% hypergraph") && text.contains("generator="));
    let solved = kgroup(&[
        "solve",
        "--problem",
        "hypergraph-partitioning",
        "--input",
        s(&path),
        "--epochs",
        "100",
        "--restarts",
        "1",
    ]);
    assert_eq!(code(&solved), 0);
    let too_many = kgroup(&["generate", "er", "--vertices", "3", "--edges", "9"]);
    assert_eq!(code(&too_many), 1);
}

#[test]
fn echoed_config_reproduces_run_and_trace() {
    let dir = TempDir::new().unwrap();
    let (first, trace1) = (dir.path().join("a.json"), dir.path().join("a.csv"));
    let out = kgroup(&[
        "solve",
        "--problem",
        "graph-partitioning",
        "--input",
        s(&fixture("petersen.edges")),
        "--epochs",
        "300",
        "--restarts",
        "3",
        "--seed",
        "11",
        "--gamma0",
        "-0.5",
        "--output",
        s(&first),
        "--trace",
        s(&trace1),
    ]);
    assert_eq!(code(&out), 0);
    let stored = read_json(&first);
    assert_eq!(stored["config"]["train"]["anneal"]["gamma0"], -0.5);

    // replay from the echo alone, redirecting the outputs
    let mut echo = stored["config"].clone();
    let (second, trace2) = (dir.path().join("b.json"), dir.path().join("b.csv"));
    echo["output"] = Value::from(s(&second));
    echo["trace"] = Value::from(s(&trace2));
    let config = dir.path().join("config.json");
    std::fs::write(&config, echo.to_string()).unwrap();
    let out = kgroup(&["solve", "--config", s(&config)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let replay = read_json(&second);
    for key in [
        "assignment",
        "objective",
        "metrics",
        "restarts",
        "epochs_to_first_feasible",
    ] {
        assert_eq!(replay[key], stored[key], "{key}");
    }
    let trace = std::fs::read_to_string(&trace1).unwrap();
    assert!(trace.starts_with("epoch,loss,mean_gini,metric,gamma,lambda1,lambda2\n"));
    assert_eq!(trace.lines().count(), 1 + 301);
    assert_eq!(trace, std::fs::read_to_string(&trace2).unwrap());
}

#[test]
fn thread_count_from_environment() {
    let k4 = fixture("k4.edges");
    let args = ["solve", "--problem", "maxcut", "--input", s(&k4), "--epochs", "50"];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_kgroup"))
            .args(args)
            .env("KGROUP_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert_eq!(code(&one), 0);
    let mut a = json_stdout(&one);
    let mut b = json_stdout(&run("4"));
    a["wall_time_seconds"] = Value::Null;
    b["wall_time_seconds"] = Value::Null;
    assert_eq!(a, b);
    assert_eq!(code(&run("lots")), 1);
}

#[test]
fn backend_flag_picks_its_learning_rate() {
    let out = kgroup(&[
        "solve",
        "--problem",
        "maxcut",
        "--input",
        s(&fixture("k4.edges")),
        "--backend",
        "message-passing",
        "--epochs",
        "20",
        "--restarts",
        "1",
    ]);
    assert!(matches!(code(&out), 0 | 2));
    let r = json_stdout(&out);
    assert_eq!(r["config"]["train"]["encoder"]["backend"], "message-passing");
    assert_eq!(r["config"]["train"]["optimizer"]["learning_rate"], 1e-4);
}
