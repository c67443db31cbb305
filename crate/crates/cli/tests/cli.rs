use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn semireg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semireg")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn report(dir: &Path, check: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{check}.json"))).unwrap()).unwrap()
}

fn run_config(dir: &Path, json: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = write_config(dir, "cfg.json", json);
    let out = dir.join("out");
    let mut args = vec!["--quiet", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (semireg(&args), out)
}

fn examples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn defaults_print_as_json() {
    let o = semireg(&["--print-defaults"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 42);
    assert_eq!(v["settings"]["grid_resolution"], 401);
    assert_eq!(v["moduli"]["schedule"]["shells"], 8);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, _) = run_config(tmp.path(), r#"{"command": "suite", "suite": {"name": "corpus"}, "sed": 1}"#, &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sed"));
    let (o, _) = run_config(tmp.path(), r#"{"command": "moduli", "moduli": {"map": "no_such_map"}}"#, &[]);
    assert_eq!(code(&o), 2);
    let (o, _) = run_config(tmp.path(), "{ not json", &[]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&semireg(&["--config", "/nonexistent/semireg.json"])), 2);
    assert_eq!(code(&semireg(&[])), 2, "neither --config nor --suite");
    assert_eq!(code(&semireg(&["--suite", "nope"])), 2);
}

#[test]
fn failed_check_exits_with_one() {
    // Rate 1.5 exceeds the true openness 1 of F(x) = {x, 0}.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "certify", "certify": {"map": "two_branch",
        "form": {"tag": "semireg_set", "direction": "sufficient"}, "constants": {"c": 1.5, "r": 0.5, "alpha": 0.5}}}"#;
    let (o, out) = run_config(tmp.path(), cfg, &[]);
    assert_eq!(code(&o), 1);
    let r = report(&out, "certify_two_branch_semireg_set_sufficient");
    assert_eq!(r["verdict"], "fail");
    assert!(!r["witnesses"].as_array().unwrap().is_empty());
    assert_eq!(r["schema_version"], 1);
}

#[test]
fn reports_repeat_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str, workers: &str| {
        let out = tmp.path().join(dir);
        let o = semireg(&["--quiet", "--suite", "corpus", "--workers", workers, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a", "1"), run("b", "3"));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 8, "seven corpus reports and the summary");
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
    assert!(!fs::read_to_string(a.join("corpus_two_branch.json")).unwrap().contains("runtime_ms"));
}

#[test]
fn timing_is_opt_in() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = semireg(&["--quiet", "--timing", "--suite", "solve", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(report(&out, "solve_abs_newton_0")["runtime_ms"].is_u64());
}

#[test]
fn moduli_suite_writes_estimates_and_product() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    let o = semireg(&["--quiet", "--suite", "moduli", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let lopen = report(&out, "moduli_two_branch_lopen");
    assert_eq!(lopen["verdict"], "info");
    assert!(lopen["brackets"]["lopen"].is_array());
    assert!(out.join("moduli_two_branch_semireg.json").exists());
    let prod = report(&out, "moduli_two_branch_lopen_x_semireg");
    assert_eq!(prod["verdict"], "pass");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn solve_suite_takes_one_newton_step() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = semireg(&["--quiet", "--suite", "solve", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.join("solve_abs_newton_0.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert!(rows[0].starts_with("k,x0,residual"));
    assert_eq!(rows.len(), 3, "x0 and x1: {csv}");
    assert_eq!(report(&out, "solve_abs_newton_0")["values"]["iterations"], 1.0);
}

#[test]
fn seed_flag_reaches_the_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "moduli", "seed": 5, "moduli": {"map": "two_branch", "kinds": ["lopen"]}}"#;
    let (o, out) = run_config(tmp.path(), cfg, &["--seed", "9", "--norm", "max"]);
    assert_eq!(code(&o), 0);
    let r = report(&out, "moduli_two_branch_lopen");
    assert_eq!(r["seed"], 9);
    assert_eq!(r["details"]["seed"], 9);
    assert_eq!(r["details"]["norm"], "max");
}

#[test]
fn bundled_configs_validate() {
    let mut n = 0;
    for entry in fs::read_dir(examples_dir()).unwrap() {
        let p = entry.unwrap().path();
        let o = semireg(&["--validate", "--config", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
        n += 1;
    }
    assert!(n >= 8);
}

#[test]
fn bundled_single_checks_pass() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["certify_two_branch", "cover_kaluza", "cover_rosl_band", "cover_selection", "moduli_two_branch", "solve_inline_box"] {
        let cfg = examples_dir().join(format!("{name}.json"));
        let out = tmp.path().join(name);
        let o = semireg(&["--quiet", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
