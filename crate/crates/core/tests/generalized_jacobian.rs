mod common;

use common::{fixture_candidates, rng};
use lmcert_core::generalized_jacobian::{
    a_nonsingularity, clarke_selectors, enumerate_b_selectors, kkt_map_directional,
};
use lmcert_core::lower_level::{check_assumption_a, classify_partition, names};
use lmcert_core::{parse_problem, solve_lower, CheckConfig, KktSolution, LowerSeed, PathTag, ProblemSpec, SolveMethod};
use nalgebra::DVector;
use rand::Rng;

fn smallest_pivot(spec: &ProblemSpec, sol: &KktSolution, cfg: &CheckConfig) -> f64 {
    let (_, g) = spec
        .lower_constraint_values(sol.x.as_slice(), sol.y.as_slice())
        .unwrap();
    let part = classify_partition(g.as_slice(), sol.lambda.as_slice(), cfg.tol_act).unwrap();
    let mut sel = enumerate_b_selectors(&part, cfg.beta_cap).unwrap();
    sel.extend(clarke_selectors(&part, 5, cfg.beta_cap).unwrap());
    a_nonsingularity(spec, sol, &sel)
        .unwrap()
        .iter()
        .map(|c| if c.nonsingular { c.min_pivot } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn selector_matrices_are_nonsingular_under_assumption_a() {
    let cfg = CheckConfig::default();
    let mut checked = 0;
    for (name, spec, c) in fixture_candidates() {
        let a = check_assumption_a(&spec, &c.x, &c.y, &cfg).unwrap();
        if !a.holds(names::ASSUMPTION_A) {
            continue;
        }
        checked += 1;
        let sol = KktSolution::at_point(
            &spec,
            &c.x,
            &c.y,
            a.mu.as_slice(),
            a.lambda.as_slice(),
            PathTag::Nonsmooth,
        )
        .unwrap();
        assert!(smallest_pivot(&spec, &sol, &cfg) >= 1e-8, "{name}");
        for dx in [1e-3, -1e-3, 5e-4, -5e-4] {
            let x = [c.x[0] + dx];
            let seed = LowerSeed::with_multipliers(c.y.clone(), vec![], a.lambda.as_slice().to_vec());
            let s = solve_lower(&spec, &x, &seed, &cfg, SolveMethod::Auto).unwrap();
            assert!(smallest_pivot(&spec, &s, &cfg) >= 1e-8, "{name} at x* + {dx}");
        }
    }
    assert_eq!(checked, 4);
}

/// Two degenerate constraints at the origin, so `β = {1, 2}`.
fn double_kink() -> ProblemSpec {
    parse_problem("dims 2 2 0 2 0 0\nf = -(y1 - x1)^2 - (y2 - x1 - x2)^2\ng1 = y1\ng2 = y2\n").unwrap()
}

#[test]
fn tracked_directional_derivatives_lie_in_the_candidate_set() {
    let cfg = CheckConfig::default();
    let mut r = rng(7);
    let cases: Vec<(ProblemSpec, usize)> = vec![(lmcert_core::fixtures::p2(), 1), (double_kink(), 2)];
    for (spec, n) in cases {
        let d = spec.dims();
        let base = solve_lower(
            &spec,
            &vec![0.0; n],
            &LowerSeed::new(vec![0.0; d.m]),
            &cfg,
            SolveMethod::Auto,
        )
        .unwrap();
        let stack = |s: &KktSolution| {
            DVector::from_iterator(d.m + d.m1 + d.m2, s.y.iter().chain(&s.mu).chain(&s.lambda).copied())
        };
        let z0 = stack(&base);
        for _ in 0..20 {
            let dir = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
            let set = kkt_map_directional(&spec, &base, &dir, &cfg).unwrap();
            for t in [1e-4, 1e-5] {
                let x: Vec<f64> = dir.iter().map(|v| t * v).collect();
                let seed = LowerSeed::with_multipliers(
                    base.y.as_slice().to_vec(),
                    base.mu.as_slice().to_vec(),
                    base.lambda.as_slice().to_vec(),
                );
                let s = solve_lower(&spec, &x, &seed, &cfg, SolveMethod::Auto).unwrap();
                let fd = (stack(&s) - &z0) / t;
                assert!(set.distance_to(&fd) <= 1e-3, "direction {dir:?}, t = {t}: {fd:?}");
            }
        }
    }
}
