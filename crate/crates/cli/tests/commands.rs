use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn etfrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etfrp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Mean value of a table row, by label prefix.
fn row_mean(out: &str, label: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with(label)).unwrap_or_else(|| panic!("no row {label} in\n{out}"));
    line[label.len()..].split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn gen_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for f in [&a, &b] {
        let o = etfrp(&["gen", "--trucks", "1", "--stops", "3", "--seed", "1", "--out", p(f)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let inst = serde_json::from_str::<serde_json::Value>(&text).unwrap();
    assert_eq!(inst["trucks"].as_array().unwrap().len(), 1);
    // and the harness accepts it
    let o = etfrp(&["run", "--instance", p(&a), "--policy", "heuristic", "--episodes", "2"]);
    assert!(o.status.success());
}

#[test]
fn more_stops_than_nodes_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let o = etfrp(&["gen", "--trucks", "1", "--stops", "12", "--nodes", "10", "--out", p(&out)]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn planner_on_deterministic_fixture() {
    let o = etfrp(&["run", "--instance", "T1-deterministic", "--policy", "planner", "--episodes", "1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(row_mean(&out, "Success Rate (%)"), 100.0);
    assert_eq!(row_mean(&out, "Total Time (H)"), 2.4);
}

#[test]
fn zero_episodes_is_an_empty_report() {
    let o = etfrp(&["run", "--instance", "T1", "--policy", "random", "--episodes", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no episodes"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(etfrp(&[]).status.code(), Some(2));
    assert_eq!(etfrp(&["run", "--instance", "T1", "--policy", "greedy"]).status.code(), Some(2));
    assert_eq!(etfrp(&["run", "--instance", "/no/such/file.json"]).status.code(), Some(2));
    assert_eq!(etfrp(&["bench", "--instance", "T1", "--policies", "planner"]).status.code(), Some(2));
    assert_eq!(etfrp(&["serve", "--transport", "pigeon"]).status.code(), Some(2));
}

#[test]
fn replay_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    let o = etfrp(&["run", "--instance", "T1", "--policy", "heuristic", "--seed", "5", "--trace-dir", p(&traces)]);
    assert!(o.status.success());
    let trace = traces.join("episode0-seed5.trace.jsonl");

    let clean = etfrp(&["replay", "--trace", p(&trace), "--instance", "T1"]);
    assert_eq!(clean.status.code(), Some(0), "{}", stdout(&clean));

    // bump the reward of the first record that carries one
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let k = lines.iter().position(|v| v["reward"].is_number()).unwrap();
    lines[k]["reward"] = serde_json::json!(lines[k]["reward"].as_f64().unwrap() + 1.0);
    let tampered = dir.path().join("tampered.jsonl");
    fs::write(&tampered, lines.iter().map(|v| format!("{v}\n")).collect::<String>()).unwrap();
    let bad = etfrp(&["replay", "--trace", p(&tampered), "--instance", "T1"]);
    assert_eq!(bad.status.code(), Some(1));
    // the header line precedes record 0
    assert!(stdout(&bad).contains(&format!("record {}", k - 1)), "{}", stdout(&bad));

    let wrong = etfrp(&["replay", "--trace", p(&trace), "--instance", "T1-deterministic"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn bench_csv_has_one_row_per_episode_and_policy() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let o = etfrp(&[
        "bench",
        "--instance",
        "T1",
        "--policies",
        "planner,heuristic,random",
        "--episodes",
        "7",
        "--seed",
        "3",
        "--csv",
        p(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("scenario_id,policy,"));
    assert_eq!(lines.count(), 7 * 3);
    let out = stdout(&o);
    assert!(out.contains("Normalized Reward (planner)"));
    assert!(out.contains("7 scenarios"));
}

#[test]
fn identical_policies_never_win() {
    let o = etfrp(&["bench", "--instance", "T1", "--policies", "heuristic,heuristic", "--episodes", "5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("5 scenarios, 5 ties"), "{out}");
}
