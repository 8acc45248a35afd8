//! Workloads shared by the benchmarks.

use lmcert_core::{parse_problem, CandidatePoint, ProblemSpec};

/// A lower level with `m` coupled variables and `m` box constraints
/// `y_i <= 1`, maximized at `y = x·1` for `|x| < 1`.
pub fn coupled_chain(m: usize) -> ProblemSpec {
    let mut f = Vec::new();
    for i in 1..=m {
        f.push(format!("-(y{i} - x1)^2"));
        if i > 1 {
            f.push(format!("-0.25*(y{i} - y{})^2", i - 1));
        }
    }
    f.push("0.5*x1^2".into());
    let mut text = format!("dims 1 {m} 0 {m} 0 1\nf = {}\n", f.join(" + "));
    for i in 1..=m {
        text.push_str(&format!("g{i} = y{i} - 1\n"));
    }
    text.push_str("G1 = x1 - 2\n");
    parse_problem(&text).expect("chain problem parses")
}

pub fn chain_candidate(m: usize, x: f64) -> CandidatePoint {
    CandidatePoint::new(vec![x], vec![x; m])
}
