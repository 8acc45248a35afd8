//! Reference problems shipped with the crate.
//!
//! * `P1`: `f = x y - y^2/2`, `g = y - 1 <= 0`, `G = x - 2 <= 0`.
//! * `P2`: `f = -(y - x)^2`, `g = y <= 0`, no upper constraints.
//! * `P3`: `P1` objective with `G1 = x <= 0`, `G2 = -x <= 0` (MFCQ fails at 0).
//! * `P4`: `P1` with `G = 1 - x <= 0`.

use crate::problem::{parse_problem, ProblemSpec};

pub const P1_TEXT: &str = include_str!("../fixtures/p1.prob");
pub const P2_TEXT: &str = include_str!("../fixtures/p2.prob");
pub const P3_TEXT: &str = include_str!("../fixtures/p3.prob");
pub const P4_TEXT: &str = include_str!("../fixtures/p4.prob");
pub const BROKEN_TEXT: &str = include_str!("../fixtures/broken.prob");

pub fn p1() -> ProblemSpec {
    parse_problem(P1_TEXT).expect("P1 fixture parses")
}

pub fn p2() -> ProblemSpec {
    parse_problem(P2_TEXT).expect("P2 fixture parses")
}

pub fn p3() -> ProblemSpec {
    parse_problem(P3_TEXT).expect("P3 fixture parses")
}

pub fn p4() -> ProblemSpec {
    parse_problem(P4_TEXT).expect("P4 fixture parses")
}
