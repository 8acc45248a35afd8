use std::fs;
use std::path::Path;

use lmcert_core::{parse_problem, CandidatePoint, CheckConfig, ProblemSpec};

use crate::cli::Run;
use crate::error::CliError;

/// Parse `a,b,c` into finite reals; the empty string is the empty vector.
pub fn parse_reals(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(CliError::Usage(format!("--{flag}: `{s}` is not finite"))),
                Err(_) => Err(CliError::Usage(format!("--{flag}: `{s}` is not a number"))),
            }
        })
        .collect()
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec, CliError> {
    parse_problem(&read(path)?).map_err(|source| CliError::Problem {
        path: path.to_path_buf(),
        source: source.into(),
    })
}

pub fn load_config(run: &Run) -> Result<CheckConfig, CliError> {
    let mut cfg = match &run.config {
        Some(p) => CheckConfig::from_text(&read(p)?).map_err(|source| CliError::Problem {
            path: p.clone(),
            source,
        })?,
        None => CheckConfig::default(),
    };
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Values of a repeatable flag, one per candidate: absent, given once for
/// all candidates, or given once per candidate.
fn per_candidate(flag: &str, values: &[String], count: usize) -> Result<Vec<Option<Vec<f64>>>, CliError> {
    match values.len() {
        0 => Ok(vec![None; count]),
        1 => {
            let v = parse_reals(flag, &values[0])?;
            Ok(vec![Some(v); count])
        }
        k if k == count => values.iter().map(|s| parse_reals(flag, s).map(Some)).collect(),
        k => Err(CliError::Usage(format!(
            "--{flag} given {k} times for {count} candidates"
        ))),
    }
}

/// Candidates from the flags. `--y` defaults to zeros when `require_y` is
/// false.
pub fn candidates(run: &Run, spec: &ProblemSpec, require_y: bool) -> Result<Vec<CandidatePoint>, CliError> {
    let d = spec.dims();
    let xs: Vec<Vec<f64>> = if run.x.is_empty() {
        if d.n == 0 {
            vec![Vec::new()]
        } else {
            return Err(CliError::Usage("--x is required".into()));
        }
    } else {
        run.x.iter().map(|s| parse_reals("x", s)).collect::<Result<_, _>>()?
    };
    let count = xs.len();
    let ys = per_candidate("y", &run.y, count)?;
    let mus = per_candidate("mu", &run.mu, count)?;
    let lambdas = per_candidate("lambda", &run.lambda, count)?;
    let us = per_candidate("u", &run.u, count)?;
    let vs = per_candidate("v", &run.v, count)?;
    let mut out = Vec::with_capacity(count);
    for (k, x) in xs.into_iter().enumerate() {
        let y = match ys[k].clone() {
            Some(y) => y,
            None if require_y && d.m > 0 => return Err(CliError::Usage("--y is required".into())),
            None => vec![0.0; d.m],
        };
        let checks = [
            ("x", x.len(), d.n),
            ("y", y.len(), d.m),
            ("mu", mus[k].as_ref().map_or(d.m1, Vec::len), d.m1),
            ("lambda", lambdas[k].as_ref().map_or(d.m2, Vec::len), d.m2),
            ("u", us[k].as_ref().map_or(d.n1, Vec::len), d.n1),
            ("v", vs[k].as_ref().map_or(d.n2, Vec::len), d.n2),
        ];
        for (flag, got, want) in checks {
            if got != want {
                return Err(CliError::Usage(format!(
                    "--{flag} has {got} entries, the problem expects {want}"
                )));
            }
        }
        out.push(CandidatePoint {
            x,
            y,
            mu: mus[k].clone(),
            lambda: lambdas[k].clone(),
            u: us[k].clone(),
            v: vs[k].clone(),
        });
    }
    Ok(out)
}
