use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use lmcert_core::{render_summary, CertificateReport};
use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn lmcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn certify_json(dir: &TempDir, name: &str, problem: &str, extra: &[&str]) -> (Output, String) {
    let out = dir.path().join(name);
    let p = fixture(problem);
    let mut args = vec!["certify", p.to_str().unwrap(), "--json", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = lmcert(&args);
    let json = fs::read_to_string(&out).unwrap_or_default();
    (o, json)
}

#[test]
fn certify_exit_codes_follow_verdicts() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("p1.prob", "0", "0", 0, "certified-local-minimax"),
        ("p2.prob", "0", "0", 0, "necessary-conditions-pass"),
        ("p1.prob", "0.5", "0.5", 2, "refuted"),
    ];
    for (problem, x, y, code, verdict) in cases {
        let (o, json) = certify_json(&dir, "r.json", problem, &["--x", x, "--y", y]);
        assert_eq!(o.status.code(), Some(code), "{problem} ({x}, {y}): {}", stderr(&o));
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["verdict"], verdict);
        assert_eq!(v["command"], "certify");
        assert!(stdout(&o).starts_with(&format!("verdict: {verdict}\n")));
    }
}

#[test]
fn inconclusive_verdict_exits_three() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("degenerate.prob");
    fs::write(
        &p,
        "dims 1 1 0 1 1 0\nf = x1*y1 - 0.5*y1^2 + x1\ng1 = y1 - 1\nH1 = x1^2\n",
    )
    .unwrap();
    let o = lmcert(&["certify", p.to_str().unwrap(), "--x", "0", "--y", "0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).starts_with("verdict: inconclusive\n"));
}

#[test]
fn broken_problem_reports_the_line() {
    let o = lmcert(&["validate", fixture("broken.prob").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    let o = lmcert(&["validate", fixture("p1.prob").to_str().unwrap(), "--x", "0", "--y", "0"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let p1 = fixture("p1.prob");
    let p1 = p1.to_str().unwrap();
    for args in [
        vec!["certify", p1, "--x", "nan", "--y", "0"],
        vec!["certify", p1, "--x", "inf", "--y", "0"],
        vec!["certify", p1, "--x", "0,1", "--y", "0"],
        vec!["certify", p1, "--x", "0"],
        vec!["certify", p1, "--x", "zero", "--y", "0"],
        vec!["certify", "/nonexistent.prob", "--x", "0", "--y", "0"],
        vec![
            "certify", p1, "--x", "0", "--x", "1", "--y", "0", "--y", "1", "--y", "2",
        ],
    ] {
        let o = lmcert(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr(&o).starts_with("error: "), "{args:?}");
    }
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    let dir = TempDir::new().unwrap();
    for problem in ["p1.prob", "p2.prob", "p3.prob"] {
        let (o1, a) = certify_json(&dir, "a.json", problem, &["--x", "0", "--y", "0"]);
        let (_, b) = certify_json(&dir, "b.json", problem, &["--x", "0", "--y", "0"]);
        assert_eq!(a, b, "{problem}");
        let report = CertificateReport::from_json(&a).unwrap();
        assert_eq!(render_summary(&report), stdout(&o1), "{problem}");
    }
}

#[test]
fn parallel_candidates_keep_input_order() {
    let dir = TempDir::new().unwrap();
    let xs = ["0", "0.5", "-0.3", "0.2"];
    let mut args = Vec::new();
    for x in xs {
        args.extend(["--x", x, "--y", x]);
    }
    args.extend(["--jobs", "3"]);
    let (o, json) = certify_json(&dir, "many.json", "p1.prob", &args);
    assert_eq!(o.status.code(), Some(2));
    let all: Vec<Value> = serde_json::from_str(&json).unwrap();
    assert_eq!(all.len(), xs.len());
    for (x, report) in xs.iter().zip(&all) {
        let (_, single) = certify_json(&dir, "one.json", "p1.prob", &["--x", x, "--y", x]);
        let single: Value = serde_json::from_str(&single).unwrap();
        assert_eq!(report, &single, "x = {x}");
    }
}

#[test]
fn config_file_and_seed_are_applied() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("check.cfg");
    fs::write(&cfg, "# tighter Newton\ntol_newton = 1e-12\nseed = 3\n").unwrap();
    let (o, json) = certify_json(
        &dir,
        "r.json",
        "p1.prob",
        &[
            "--x",
            "0",
            "--y",
            "0",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "11",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["config"]["seed"], 11);
    assert_eq!(v["config"]["tol_newton"], 1e-12);

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = lmcert(&[
        "certify",
        fixture("p1.prob").to_str().unwrap(),
        "--x",
        "0",
        "--y",
        "0",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solve_lower_prints_the_newton_trace() {
    let o = lmcert(&[
        "solve-lower",
        fixture("p1.prob").to_str().unwrap(),
        "--x",
        "0.3",
        "--method",
        "smooth",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap().trim_start().starts_with("0 "));
    assert!(text.contains("y = [3e-1]"), "{text}");
}

#[test]
fn value_derivs_agree_with_finite_differences() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("vd.json");
    let o = lmcert(&[
        "value-derivs",
        fixture("p1.prob").to_str().unwrap(),
        "--x",
        "0.3",
        "--json",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert!((v["gradient"][0].as_f64().unwrap() - 0.3).abs() < 1e-12);
    assert!((v["hessian"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["passed"], true);
}

#[test]
fn oracle_command_matches_the_definition_check() {
    let p1 = fixture("p1.prob");
    let o = lmcert(&["oracle", p1.to_str().unwrap(), "--x", "0", "--y", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let o = lmcert(&["oracle", p1.to_str().unwrap(), "--x", "0.5", "--y", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("on the right"));
}

#[test]
fn subdiff_lists_both_selectors_at_a_kink() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sd.json");
    let o = lmcert(&[
        "subdiff",
        fixture("p2.prob").to_str().unwrap(),
        "--x",
        "0",
        "--y",
        "0",
        "--json",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    let sel = v["selectors"].as_array().unwrap();
    assert_eq!(sel.len(), 2);
    assert!(sel.iter().all(|s| s["nonsingular"] == true));
    assert_eq!(v["partition"]["beta"], serde_json::json!([0]));
}
