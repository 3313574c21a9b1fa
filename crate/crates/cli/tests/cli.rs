use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lsgd_cli::run_cli;

fn lsgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsgd"))
        .args(args)
        .env_remove("LSGD_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const RUN_CONFIG: &str = r#"{
  "problem": {"id": "quadratic", "dimension": 3, "L": 1.0, "sigma2": 0.5, "x0": [1.0, 2.0, -1.0], "n": 2},
  "method": {"variant": "decaying_local_sgd", "n": 2, "K": 3, "R": 12,
             "schedule": {"eta_g": 0.05, "b": 2.0, "K": 3}, "seed": 4}
}"#;

const PLAN: &str = r#"{
  "problem": {"id": "toy_adversarial", "sigma": 1.0, "x0": -3.0, "n": 4},
  "methods": [
    {"variant": "local_sgd", "n": 4, "K": 2, "R": 20, "schedule": {"eta_g": 1.0, "eta_l": 4.0}},
    {"variant": "dual_local_sgd", "n": 4, "K": 2, "R": 20, "schedule": {"eta_g": 1.0, "eta_l": 2.0}}
  ],
  "eta_grid": [0.25, 0.125, 0.0625],
  "seeds": [1, 2, 3],
  "epsilon_target": 0.5
}"#;

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn complexity_prints_the_minibatch_hero_value() {
    let o = lsgd(&[
        "complexity", "--setting", "nonconvex", "--eps", "0.1", "--L", "1", "--sigma2", "1",
        "--delta", "1", "--n", "10", "--tau-seconds", "1", "--h-seconds", "1",
        "--formula", "minibatch_hero_upper_nonconvex",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "30");

    let table = lsgd(&["complexity", "--setting", "nonconvex", "--eps", "0.1", "--n", "10"]);
    assert!(stdout(&table).contains("minibatch_hero_upper_nonconvex,nonconvex,0.1,1.0,1.0,1.0,,10,1.0,1.0,30.0"));
}

#[test]
fn exit_codes_for_bad_input() {
    assert_eq!(run_cli(["lsgd", "frobnicate"]), 2);
    assert_eq!(run_cli(["lsgd", "--help"]), 0);
    assert_eq!(run_cli(["lsgd", "run", "--config", "/nonexistent/run.json"]), 2);
    assert_eq!(run_cli(["lsgd", "complexity", "--setting", "sideways", "--eps", "0.1"]), 2);
    assert_eq!(run_cli(["lsgd", "complexity", "--setting", "convex", "--eps", "-1"]), 2);
    assert_eq!(run_cli(["lsgd", "complexity", "--setting", "convex", "--eps", "0.1", "--delta", "2"]), 2);
    assert_eq!(
        run_cli(["lsgd", "complexity", "--setting", "convex", "--eps", "0.1", "--formula", "nope"]),
        2
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", &RUN_CONFIG.replace("\"K\": 3}", "\"K\": 4}"));
    assert_eq!(run_cli(["lsgd", "run", "--config", &bad, "--out", dir.path().to_str().unwrap()]), 2);
    let neg = write(dir.path(), "run.json", RUN_CONFIG);
    assert_eq!(run_cli(["lsgd", "run", "--config", &neg, "--h-seconds", "-1"]), 2);
}

#[test]
fn run_writes_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", RUN_CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let code = run_cli(["lsgd", "run", "--config", &cfg, "--out", out.to_str().unwrap(), "--tau-seconds", "2"]);
        assert_eq!(code, 0);
    }
    let ta = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert_eq!(ta, fs::read_to_string(b.join("trace.csv")).unwrap());
    let lines: Vec<&str> = ta.lines().collect();
    assert_eq!(lines[0], "round,grad_norm_sq,f_gap,sim_time_s,m_1,m_2");
    assert_eq!(lines.len(), 13);
    // τ + K·h = 2 + 3.
    assert!(lines[12].starts_with("11,") && lines[12].ends_with(",60.0,3,3"), "{}", lines[12]);

    let j = dir.path().join("j");
    let code = run_cli(["lsgd", "run", "--config", &cfg, "--out", j.to_str().unwrap(), "--format", "json", "--seed", "9"]);
    assert_eq!(code, 0);
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(j.join("trace.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 12);
}

#[test]
fn tree_check_accepts_recorded_trees_and_rejects_mutations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", RUN_CONFIG);
    let out = dir.path().to_str().unwrap();
    assert_eq!(run_cli(["lsgd", "run", "--config", &cfg, "--tree", "--out", out]), 0);
    let tree_path = dir.path().join("tree.txt");
    let tree = tree_path.to_str().unwrap();
    assert_eq!(run_cli(["lsgd", "tree-check", tree, "--gamma-g", "0.05"]), 0);
    assert_eq!(run_cli(["lsgd", "tree-check", tree, "--gamma-g", "0.05", "--r-bound", "1"]), 3);
    assert_eq!(run_cli(["lsgd", "tree-check", tree, "--gamma-g", "0.3"]), 3);

    // Double the first off-branch step.
    let text = fs::read_to_string(&tree_path).unwrap();
    let mut done = false;
    let mutated: Vec<String> = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(' ').collect();
            if !done && f.len() == 6 && f[5] == "0" {
                done = true;
                let step: f64 = f[4].parse().unwrap();
                format!("{} {} {} {} {} 0", f[0], f[1], f[2], f[3], 2.0 * step)
            } else {
                l.to_string()
            }
        })
        .collect();
    let m = write(dir.path(), "mutated.txt", &mutated.join("\n"));
    let r = lsgd(&["tree-check", &m, "--gamma-g", "0.05", "--r-bound", "5"]);
    assert_eq!(r.status.code(), Some(3));
    let garbage = write(dir.path(), "garbage.txt", "0 - - - 0 1\n1 0 zero 0 0.1 0\n");
    assert_eq!(run_cli(["lsgd", "tree-check", &garbage, "--gamma-g", "0.1"]), 2);
}

#[test]
fn tune_honours_the_output_directory_variable() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(dir.path(), "plan.json", PLAN);
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_lsgd"))
        .args(["tune", "--plan", &plan])
        .env("LSGD_OUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(target.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 6);
    assert!(stdout(&o).contains("best local_sgd eta_g="));
    assert!(target.join("curves.csv").exists());

    let again = dir.path().join("again");
    assert_eq!(run_cli(["lsgd", "tune", "--plan", &plan, "--out", again.to_str().unwrap()]), 0);
    assert_eq!(summary, fs::read_to_string(again.join("summary.csv")).unwrap());
}

#[test]
fn compare_writes_a_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(dir.path(), "plan.json", PLAN);
    let out = dir.path().join("cmp");
    let code = run_cli([
        "lsgd", "compare", "--plan", &plan, "--out", out.to_str().unwrap(), "--setting", "convex",
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,empirical_seconds,formula_seconds,ratio");
    assert!(lines[1].starts_with("local_sgd,") && lines[2].starts_with("dual_local_sgd,"));
}
