use std::path::Path;
use std::process::{Command, Output};

use genea::io;
use genea::verify::VerifyOutcome;

fn genea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genea"))
        .args(args)
        .env_remove("GENEA_THREADS")
        .output()
        .expect("run genea")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn sim_tree(dir: &Path, name: &str, seed: &str) -> String {
    let path = dir.join(name);
    let path = path.to_str().unwrap().to_owned();
    let out = genea(&["sim-tree", "--t", "1.0", "--n", "5", "--seed", seed, "--out", &path]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    path
}

#[test]
fn sim_tree_writes_a_conditioned_tree() {
    let dir = tempfile::tempdir().unwrap();
    let path = sim_tree(dir.path(), "tree.json", "42");
    let tree = io::tree_from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(tree.extant_count(), 5);
    assert_eq!(tree.horizon(), Some(1.0));
}

#[test]
fn zero_count_is_a_usage_error() {
    let out = genea(&["sim-tree", "--t", "1.0", "--n", "0", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains('n'), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn unknown_subcommand_and_missing_input_exit_2() {
    assert_eq!(genea(&["frobnicate"]).status.code(), Some(2));
    let out = genea(&["genealogy", "--input", "/nonexistent/tree.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr(&out).trim_end().lines().count(), 1);
}

#[test]
fn help_and_version_exit_0() {
    let out = genea(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sim-tree"));
    assert_eq!(genea(&["--version"]).status.code(), Some(0));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = sim_tree(dir.path(), "a.json", "9");
    let b = sim_tree(dir.path(), "b.json", "9");
    let c = sim_tree(dir.path(), "c.json", "10");
    let read = |p: &str| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn genealogy_and_historical_from_a_tree_file() {
    let dir = tempfile::tempdir().unwrap();
    let tree = sim_tree(dir.path(), "tree.json", "3");

    let out = genea(&["genealogy", "--input", &tree]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let pp = io::genealogy_from_csv(&String::from_utf8(out.stdout).unwrap(), 1.0).unwrap();
    assert_eq!(pp.len(), 4);

    let out = genea(&["historical", "--input", &tree, "--p", "0.5", "--seed", "1", "--keep-unmarked"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json.is_object());
}

#[test]
fn continuum_and_law_emit_csv() {
    let out = genea(&["continuum", "pi", "--t", "1", "--delta", "0.1", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(!out.stdout.is_empty());
    let out = genea(&["law", "branch-depth", "--t", "1", "--points", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).lines().count() >= 5);
}

#[test]
fn verify_lemma3_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let path = path.to_str().unwrap();
    let args = ["verify", "lemma3", "--t", "1", "--n", "20", "--replicates", "2000", "--seed", "7", "--out", path];
    let out = genea(&args);
    let report: VerifyOutcome = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(report.target, "lemma3");
    assert!(!report.reports.is_empty());
    let expected = if report.passed { 0 } else { 1 };
    assert_eq!(out.status.code(), Some(expected), "{}", stderr(&out));
}

#[test]
fn verify_is_independent_of_thread_count() {
    let run = |threads: &str| {
        let out = genea(&["--threads", threads, "verify", "eq5", "--replicates", "20000", "--seed", "3"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        out.stdout
    };
    assert_eq!(run("1"), run("4"));
}
