use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pap(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pap")).args(args).current_dir(dir).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("pap-cli-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn fixture_trace_has_the_conditional_open_close() {
    let d = scratch("fixture");
    let o = pap(&["run", "mug-in-fridge", "--trace", "out.jsonl"], &d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.join("out.jsonl")).unwrap();
    let atomic: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["event"] == "atomic_issued")
        .map(|v| v["action"]["action"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(atomic, ["navigate", "open", "pickup", "close"]);
    assert!(text.lines().last().unwrap().contains("\"outcome\""));
}

#[test]
fn eval_on_zero_tasks_is_empty_and_succeeds() {
    let d = scratch("empty");
    std::fs::write(d.join("none.jsonl"), "").unwrap();
    let o = pap(&["eval", "--tasks", "none.jsonl"], &d);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["metrics"]["n"], 0);
    assert_eq!(v["metrics"]["sr"], 0.0);
}

#[test]
fn every_subcommand_has_help() {
    let d = scratch("help");
    for sub in [
        vec!["gen-scenes"],
        vec!["gen-tasks"],
        vec!["train"],
        vec!["train", "planner"],
        vec!["train", "reactors"],
        vec!["train", "baseline"],
        vec!["eval"],
        vec!["experiment"],
        vec!["run"],
        vec!["repl"],
        vec!["ast-export"],
        vec!["lib-diff"],
    ] {
        let mut args = sub.clone();
        args.push("--help");
        let o = pap(&args, &d);
        assert_eq!(o.status.code(), Some(0), "{sub:?}");
        assert!(stdout(&o).contains("Usage: pap"), "{sub:?}");
    }
}

#[test]
fn usage_errors_exit_one_with_optional_json() {
    let d = scratch("usage");
    assert_eq!(pap(&["frobnicate"], &d).status.code(), Some(1));
    let o = pap(&["--json-errors", "run", "no-such-task"], &d);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(v["exit_code"], 1);
    assert!(v["message"].as_str().unwrap().contains("no-such-task"));
    std::fs::write(d.join("bad.json"), r#"{"version": "config/1", "reactors": {"kind": "noisy", "eps": 1.5}}"#).unwrap();
    let o = pap(&["--config", "bad.json", "lib-diff", "iqa/v1", "iqa/v0.1"], &d);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn overlapping_styles_are_an_invariant_violation() {
    let d = scratch("overlap");
    let cfg = r#"{"version": "suite/1", "seen_styles": [1, 2], "unseen_styles": [2, 7], "rare_rate": 0.3}"#;
    std::fs::write(d.join("suite.json"), cfg).unwrap();
    let o = pap(&["--json-errors", "gen-tasks", "--suite-config", "suite.json", "--out-dir", "t", "--n-train", "4", "--n-eval", "2"], &d);
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.join("t/train.jsonl").exists());
}

#[test]
fn lib_diff_reports_the_single_changed_procedure() {
    let d = scratch("diff");
    let o = pap(&["lib-diff", "iqa/v1", "iqa/v0.1"], &d);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["modified"], serde_json::json!(["udp_grid_search_recep"]));
    assert_eq!(v["added"].as_array().unwrap().len() + v["removed"].as_array().unwrap().len(), 0);
}

#[test]
fn library_ab_experiment_writes_two_arms_and_a_diff() {
    let d = scratch("ab");
    let o = pap(&["--seed", "2", "experiment", "library_ab", "--n-eval", "12", "--iqa-train-per-type", "10", "--out-dir", "exp"], &d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("exp/report.json")).unwrap()).unwrap();
    assert_eq!(r["arms"].as_array().unwrap().len(), 2);
    assert_eq!(r["diff"]["modified"].as_array().unwrap().len(), 1);
    assert_eq!(r["config"]["seed"], 2);
    assert!(r["config_hash"].as_str().unwrap().len() == 64);
    assert!(std::fs::read_to_string(d.join("exp/report.csv")).unwrap().starts_with("design,"));
}

#[test]
fn generate_train_and_evaluate_round_trip() {
    let d = scratch("pipeline");
    let ok = |o: Output| assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    ok(pap(&["--seed", "5", "gen-tasks", "--n-train", "40", "--n-eval", "8", "--out-dir", "t"], &d));
    ok(pap(&["train", "planner", "--tasks", "t/train.jsonl", "--out", "planner.json", "--max-iters", "60"], &d));
    ok(pap(&["train", "reactors", "--tasks", "t/train.jsonl", "--out", "reactors.json", "--max-iters", "60"], &d));
    let cfg = r#"{"version": "config/1", "seed": 5,
        "planner": {"kind": "learned", "path": "planner.json"},
        "reactors": {"kind": "learned", "path": "reactors.json"}}"#;
    std::fs::write(d.join("run.json"), cfg).unwrap();
    let o = pap(&["--config", "run.json", "eval", "--tasks", "t/seen.jsonl", "--outcomes", "out.jsonl"], &d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["metrics"]["n"], 8);
    assert_eq!(v["config"]["seed"], 5);
    assert_eq!(std::fs::read_to_string(d.join("out.jsonl")).unwrap().lines().count(), 8);
    let seen = std::fs::read_to_string(d.join("t/seen.jsonl")).unwrap();
    let id = serde_json::from_str::<serde_json::Value>(seen.lines().next().unwrap()).unwrap()["id"].as_str().unwrap().to_string();
    ok(pap(&["--config", "run.json", "run", &id, "--tasks", "t/seen.jsonl", "--trace", "one.jsonl"], &d));
    assert!(d.join("one.jsonl").exists());
}

#[test]
fn repl_answers_questions_line_by_line() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_pap"))
        .args(["repl", "--kind", "iqa"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"is there an apple in the fridge?\ngibberish\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("a^e: udp_check_contain(apple, fridge)"), "{text}");
    assert!(text.contains("outcome: completed"));
    assert!(text.contains("no plan"));
}

#[test]
fn ast_export_json_and_dot() {
    let d = scratch("ast");
    let o = pap(&["ast-export", "--library", "iqa/v1", "--out", "ast.json"], &d);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("ast.json")).unwrap()).unwrap();
    assert!(v.is_object());
    let o = pap(&["ast-export", "--format", "dot"], &d);
    assert!(stdout(&o).starts_with("digraph"));
}

#[test]
fn gen_scenes_is_reproducible_from_the_seed() {
    let d = scratch("scenes");
    let a = stdout(&pap(&["--seed", "9", "gen-scenes", "--n", "3"], &d));
    let b = stdout(&pap(&["--seed", "9", "gen-scenes", "--n", "3"], &d));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 3);
    assert_ne!(a, stdout(&pap(&["--seed", "10", "gen-scenes", "--n", "3"], &d)));
}
