use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_adjointkit"));
    cmd.env_remove("ADJOINTKIT_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn adjointkit")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn svd_prints_sigma_line() {
    let dir = TempDir::new().unwrap();
    let op = write(&dir, "a.json", r#"{"rows":2,"cols":3,"entries":[2,0,1,2,1.3333333333333333,0.3333333333333333]}"#);
    let out = run(&["svd", "--op", s(&op)]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.lines().any(|l| l == "3.1306,1.0433"), "{text}");
    assert!(text.contains("dim N(A)=1"), "{text}");
    let head: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(head["rank"], 2);
}

#[test]
fn logistic_equilibrium_is_hurwitz() {
    let out = run(&["stability", "--model", "logistic", "--eq", "1"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["hurwitz"], true);
    assert!(stdout(&out).starts_with(r#"{"hurwitz":true"#));
}

#[test]
fn malformed_json_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let op = write(&dir, "bad.json", r#"{"rows": 2, "cols": "#);
    for args in [vec!["svd", "--op", s(&op)], vec!["adjoint-check", "--op", s(&op)]] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2));
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["sturm", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn nonpositive_tolerance_is_rejected() {
    let dir = TempDir::new().unwrap();
    let op = write(&dir, "a.json", r#"[[1,0],[0,1]]"#);
    let out = run(&["adjoint-check", "--op", s(&op), "--tol", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rotation_has_no_lyapunov_certificate() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "rot.json", "[[0,1],[-1,0]]");
    let out = run(&["stability", "--model", s(&a)]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}");
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(v["hurwitz"], false);
    assert!(v["lyapunov_P"].is_null());
}

#[test]
fn solve_flags_the_singular_example() {
    let dir = TempDir::new().unwrap();
    let op = write(&dir, "op.json", r#"{"rows":2,"cols":2,"entries":[1,2,1,2]}"#);
    let rhs = write(&dir, "f.json", "[1,0]");
    let out = run(&["solve", "--op", s(&op), "--rhs", s(&rhs)]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}");
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    let defect = v["defect"].as_f64().unwrap();
    assert!((defect - 0.5f64.sqrt()).abs() <= 1e-10, "{text}");
}

#[test]
fn selftest_passes_and_negative_control_fails() {
    let out = run(&["selftest"]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}");
    for suite in ["adjoint", "gradient", "hurwitz", "sturm"] {
        assert!(text.contains(&format!("{suite}: pass")), "{text}");
    }

    let out = run(&["selftest", "--suite", "adjoint", "--corrupt-adjoint"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("adjoint: FAIL"));
}

#[test]
fn selftest_runs_only_the_requested_suite() {
    let out = run(&["selftest", "--suite", "sturm"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("sturm: pass"));
}

#[test]
fn sturm_csv_has_header_and_requested_rows() {
    let out = run(&["sturm", "--bc", "dirichlet", "--n", "15", "--modes", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,mode-samples"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    let lambda: f64 = rows[0].split(',').next().unwrap().parse().unwrap();
    assert!((lambda - std::f64::consts::PI.powi(2)).abs() < 0.1);
}

#[test]
fn r0_of_seir_blocks() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "F.json", "[[0,0.6],[0,0]]");
    let v = write(&dir, "V.json", "[[0.2,0],[-0.2,0.3]]");
    let out = run(&["r0", "--F", s(&f), "--V", s(&v)]);
    assert!(out.status.success());
    let val: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!((val["r0"].as_f64().unwrap() - 2.0).abs() <= 1e-8);
}

#[test]
fn pdeopt_gradient_check_and_fields_file() {
    let dir = TempDir::new().unwrap();
    let fields = dir.path().join("fields.csv");
    let out = run(&["pdeopt", "--problem", "advection", "--n", "8", "--beta", "2", "--check-gradient", "--fields", s(&fields)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!((v["gradient"][0].as_f64().unwrap() - 0.25).abs() <= 1e-10);

    let csv = fs::read_to_string(&fields).unwrap();
    assert_eq!(csv.lines().next(), Some("x,u,v,grad"));
    assert_eq!(csv.lines().count(), 1 + 9);
}

#[test]
fn pdeopt_descent_reduces_elliptic_objective() {
    let out = run(&["pdeopt", "--problem", "elliptic", "--descend", "--iters", "200"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let col = |line: &str| -> f64 { line.split(',').nth(1).unwrap().parse().unwrap() };
    let rows: Vec<&str> = text.lines().skip(1).collect();
    let first = col(rows[0]);
    let last = col(rows[rows.len() - 1]);
    assert!(first / last >= 100.0, "{first} -> {last}");
}

#[test]
fn output_is_deterministic_and_seed_sensitive() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.json", r#"[{"x":[0.5,-0.2],"a_obs":[0.3]},{"x":[-0.1,0.8],"a_obs":[-0.4]}]"#);
    let args = ["train", "--spec", "sizes=2,4,1", "--data", s(&data), "--iters", "20", "--step", "0.1"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let c = bin().args(args).env("ADJOINTKIT_SEED", "7").output().unwrap();
    let d = run(&[&args[..], &["--seed", "7"]].concat());
    assert_eq!(c.stdout, d.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn output_flag_writes_file_and_nothing_to_stdout() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("modes.csv");
    let out = run(&["sturm", "--n", "7", "--modes", "2", "-o", s(&path)]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(fs::read_to_string(&path).unwrap().starts_with("lambda,"));
}
