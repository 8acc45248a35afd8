use std::fmt::Write as _;

use lmcert_core::generalized_jacobian::{a_nonsingularity, enumerate_b_selectors, phi_candidate_gradient};
use lmcert_core::lower_level::classify_partition;
use lmcert_core::oracle::{fd_derivatives, FdSteps, Side};
use lmcert_core::value_function::{phi_gradient, phi_hessian, ValueFunction};
use lmcert_core::{
    certify, render_summary, solve_lower, verify_minimax_definition, CandidatePoint, CertificateReport, CheckConfig,
    Error, GridSpec, KktSolution, LowerSeed, ProblemSpec, SolveMethod, Verdict,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

/// Largest accepted gap between analytic and finite-difference gradients.
pub const GRADIENT_TOL: f64 = 1e-6;
/// Largest accepted gap between analytic and finite-difference Hessians.
pub const HESSIAN_TOL: f64 = 1e-4;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_FAIL: u8 = 2;
pub const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Report(Box<CertificateReport>),
    Value(Value),
}

#[derive(Debug)]
pub struct Outcome {
    pub text: String,
    pub json: Payload,
    pub code: u8,
}

pub fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::CertifiedLocalMinimax | Verdict::NecessaryConditionsPass => EXIT_PASS,
        Verdict::Refuted => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Refuted or failed beats inconclusive, which beats pass.
pub fn combine_codes(codes: impl IntoIterator<Item = u8>) -> u8 {
    codes.into_iter().fold(EXIT_PASS, |acc, c| match (acc, c) {
        (EXIT_FAIL, _) | (_, EXIT_FAIL) => EXIT_FAIL,
        (EXIT_INCONCLUSIVE, _) | (_, EXIT_INCONCLUSIVE) => EXIT_INCONCLUSIVE,
        _ => EXIT_PASS,
    })
}

/// JSON number, with non-finite values as strings.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn nums<'a>(v: impl IntoIterator<Item = &'a f64>) -> Value {
    Value::Array(v.into_iter().map(|&x| num(x)).collect())
}

fn fmt_vec<'a>(v: impl IntoIterator<Item = &'a f64>) -> String {
    let parts: Vec<String> = v.into_iter().map(|x| format!("{x:e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn seed_of(c: &CandidatePoint) -> LowerSeed {
    LowerSeed {
        y: c.y.clone(),
        mu: c.mu.clone(),
        lambda: c.lambda.clone(),
    }
}

fn header(spec: &ProblemSpec, command: &str, c: &CandidatePoint) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("problem_digest".into(), json!(spec.digest()));
    m.insert("x".into(), nums(&c.x));
    m
}

fn solution_json(sol: &KktSolution) -> Value {
    json!({
        "y": nums(sol.y.iter()),
        "mu": nums(sol.mu.iter()),
        "lambda": nums(sol.lambda.iter()),
        "residual": num(sol.residual),
        "path": sol.path,
        "trace": nums(&sol.trace),
    })
}

pub fn validate(spec: &ProblemSpec, candidates: &[CandidatePoint]) -> Result<Outcome, CliError> {
    let d = spec.dims();
    for c in candidates {
        spec.check_point(&c.x, &c.y)?;
    }
    let text = format!(
        "ok: dims {} {} {} {} {} {}, {} candidate(s)\nproblem: {}\n",
        d.n,
        d.m,
        d.m1,
        d.m2,
        d.n1,
        d.n2,
        candidates.len(),
        spec.digest()
    );
    let json = json!({
        "command": "validate",
        "problem_digest": spec.digest(),
        "dims": [d.n, d.m, d.m1, d.m2, d.n1, d.n2],
        "candidates": candidates.len(),
    });
    Ok(Outcome {
        text,
        json: Payload::Value(json),
        code: EXIT_PASS,
    })
}

pub fn certify_one(spec: &ProblemSpec, c: &CandidatePoint, cfg: &CheckConfig) -> Result<Outcome, CliError> {
    let report = certify(spec, c, cfg);
    Ok(Outcome {
        text: render_summary(&report),
        code: verdict_code(report.verdict),
        json: Payload::Report(Box::new(report)),
    })
}

pub fn value_derivs(
    spec: &ProblemSpec,
    c: &CandidatePoint,
    cfg: &CheckConfig,
    method: SolveMethod,
) -> Result<Outcome, CliError> {
    let sol = solve_lower(spec, &c.x, &seed_of(c), cfg, method)?;
    let value = spec.objective_value(&c.x, sol.y.as_slice())?;
    let grad = phi_gradient(spec, &sol)?;
    let hess = phi_hessian(spec, &sol)?.matrix;
    let vf = ValueFunction::new(spec, sol.clone(), cfg).with_method(method);
    let fd = fd_derivatives(|z| vf.value(z), &c.x, FdSteps::from_config(cfg))?;
    let grad_gap = (&grad - &fd.gradient).amax();
    let hess_gap = (&hess - &fd.hessian).amax();
    let pass = grad_gap <= GRADIENT_TOL && hess_gap <= HESSIAN_TOL;

    let mut text = String::new();
    let _ = writeln!(text, "x = {}, y(x) = {}", fmt_vec(&c.x), fmt_vec(sol.y.iter()));
    let _ = writeln!(text, "phi = {value:e} (finite differences {:e})", fd.value);
    let _ = writeln!(
        text,
        "{:<12} {:>24} {:>24} {:>12}",
        "entry", "analytic", "finite diff", "gap"
    );
    for i in 0..grad.len() {
        let (a, b) = (grad[i], fd.gradient[i]);
        let _ = writeln!(
            text,
            "{:<12} {a:>24e} {b:>24e} {:>12.3e}",
            format!("grad[{i}]"),
            (a - b).abs()
        );
    }
    for i in 0..hess.nrows() {
        for j in 0..hess.ncols() {
            let (a, b) = (hess[(i, j)], fd.hessian[(i, j)]);
            let _ = writeln!(
                text,
                "{:<12} {a:>24e} {b:>24e} {:>12.3e}",
                format!("hess[{i},{j}]"),
                (a - b).abs()
            );
        }
    }
    let _ = writeln!(
        text,
        "{}: gradient gap {grad_gap:e} (tol {GRADIENT_TOL:e}), Hessian gap {hess_gap:e} (tol {HESSIAN_TOL:e})",
        if pass { "pass" } else { "FAIL" }
    );

    let mut m = header(spec, "value-derivs", c);
    m.insert("solution".into(), solution_json(&sol));
    m.insert("phi".into(), num(value));
    m.insert("gradient".into(), nums(grad.iter()));
    m.insert("hessian".into(), nums(hess.transpose().iter()));
    m.insert("fd_gradient".into(), nums(fd.gradient.iter()));
    m.insert("fd_hessian".into(), nums(fd.hessian.transpose().iter()));
    m.insert("gradient_gap".into(), num(grad_gap));
    m.insert("hessian_gap".into(), num(hess_gap));
    m.insert("passed".into(), json!(pass));
    Ok(Outcome {
        text,
        json: Payload::Value(Value::Object(m)),
        code: if pass { EXIT_PASS } else { EXIT_FAIL },
    })
}

pub fn solve_lower_cmd(
    spec: &ProblemSpec,
    c: &CandidatePoint,
    cfg: &CheckConfig,
    method: SolveMethod,
) -> Result<Outcome, CliError> {
    let mut m = header(spec, "solve-lower", c);
    let mut text = String::new();
    match solve_lower(spec, &c.x, &seed_of(c), cfg, method) {
        Ok(sol) => {
            let _ = writeln!(text, "{:>4} {:>24}", "iter", "residual");
            for (k, r) in sol.trace.iter().enumerate() {
                let _ = writeln!(text, "{k:>4} {r:>24e}");
            }
            let _ = writeln!(text, "converged: path {:?}", sol.path);
            let _ = writeln!(text, "y = {}", fmt_vec(sol.y.iter()));
            let _ = writeln!(text, "mu = {}", fmt_vec(sol.mu.iter()));
            let _ = writeln!(text, "lambda = {}", fmt_vec(sol.lambda.iter()));
            m.insert("converged".into(), json!(true));
            m.insert("solution".into(), solution_json(&sol));
            Ok(Outcome {
                text,
                json: Payload::Value(Value::Object(m)),
                code: EXIT_PASS,
            })
        }
        Err(e @ Error::NoConvergence { .. }) => {
            let _ = writeln!(text, "FAIL: {e}");
            m.insert("converged".into(), json!(false));
            m.insert("error".into(), json!(e.to_string()));
            Ok(Outcome {
                text,
                json: Payload::Value(Value::Object(m)),
                code: EXIT_FAIL,
            })
        }
        Err(e) => Err(e.into()),
    }
}

pub fn oracle(spec: &ProblemSpec, c: &CandidatePoint, cfg: &CheckConfig) -> Result<Outcome, CliError> {
    let grid = GridSpec::from_config(cfg);
    let check = verify_minimax_definition(spec, &c.x, &c.y, &grid)?;
    let mut text = String::new();
    let _ = writeln!(text, "{}", if check.passed { "pass" } else { "FAIL" });
    let _ = writeln!(
        text,
        "{:>12} {:>12} {:>12} {:>14} {:>14}",
        "delta", "eta", "step", "left worst", "right worst"
    );
    for l in &check.levels {
        let _ = writeln!(
            text,
            "{:>12.4e} {:>12.4e} {:>12.4e} {:>14.4e} {:>14.4e}",
            l.delta, l.eta, l.step, l.left_worst, l.right_worst
        );
    }
    if let Some(w) = &check.worst {
        let side = match w.side {
            Side::Left => "left",
            Side::Right => "right",
        };
        let _ = writeln!(
            text,
            "worst gap {:e} on the {side} at x = {}, y = {} (tol {:e})",
            w.amount,
            fmt_vec(&w.x),
            fmt_vec(&w.y),
            check.tol
        );
    }
    let mut m = header(spec, "oracle", c);
    m.insert("y".into(), nums(&c.y));
    m.insert(
        "check".into(),
        serde_json::to_value(&check).map_err(|e| CliError::Usage(e.to_string()))?,
    );
    Ok(Outcome {
        text,
        json: Payload::Value(Value::Object(m)),
        code: if check.passed { EXIT_PASS } else { EXIT_FAIL },
    })
}

pub fn subdiff(
    spec: &ProblemSpec,
    c: &CandidatePoint,
    cfg: &CheckConfig,
    method: SolveMethod,
) -> Result<Outcome, CliError> {
    let sol = solve_lower(spec, &c.x, &seed_of(c), cfg, method)?;
    let (_, g) = spec.lower_constraint_values(&c.x, sol.y.as_slice())?;
    let part = classify_partition(g.as_slice(), sol.lambda.as_slice(), cfg.tol_act)?;
    let selectors = enumerate_b_selectors(&part, cfg.beta_cap)?;
    let checks = a_nonsingularity(spec, &sol, &selectors)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "y = {}, lambda = {}",
        fmt_vec(sol.y.iter()),
        fmt_vec(sol.lambda.iter())
    );
    let _ = writeln!(
        text,
        "alpha = {:?}, beta = {:?}, gamma = {:?}",
        part.alpha, part.beta, part.gamma
    );
    let mut rows = Vec::with_capacity(checks.len());
    let mut all_nonsingular = true;
    for ch in &checks {
        let gradient = if ch.nonsingular {
            Some(phi_candidate_gradient(spec, &sol, &ch.selector)?)
        } else {
            all_nonsingular = false;
            None
        };
        let _ = writeln!(
            text,
            "W = {}  pivot {:e}  {}",
            fmt_vec(&ch.selector.diag),
            ch.min_pivot,
            match &gradient {
                Some(gr) => format!("gradient {}", fmt_vec(gr.iter())),
                None => "singular".into(),
            }
        );
        rows.push(json!({
            "w": nums(&ch.selector.diag),
            "min_pivot": num(ch.min_pivot),
            "nonsingular": ch.nonsingular,
            "gradient": gradient.map(|gr| nums(gr.iter())),
        }));
    }
    let mut m = header(spec, "subdiff", c);
    m.insert("solution".into(), solution_json(&sol));
    m.insert(
        "partition".into(),
        json!({"alpha": part.alpha, "beta": part.beta, "gamma": part.gamma}),
    );
    m.insert("selectors".into(), Value::Array(rows));
    Ok(Outcome {
        text,
        json: Payload::Value(Value::Object(m)),
        code: if all_nonsingular { EXIT_PASS } else { EXIT_FAIL },
    })
}
