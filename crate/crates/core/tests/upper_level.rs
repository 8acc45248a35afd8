mod common;

use common::fixture_candidates;
use lmcert_core::parse_problem;
use lmcert_core::report::Status;
use lmcert_core::upper_level::{check_mfcq, upper_kkt_and_polytope};
use lmcert_core::CheckConfig;
use nalgebra::DVector;
use proptest::prelude::*;

/// Nonemptiness of `Λ` worked out by hand for each one-dimensional fixture:
/// P1 and P2 have no active upper constraint, P3 has `±x` active and P4
/// has `1 − x` active.
fn expected_nonempty(name: &str, r0: f64) -> bool {
    match name {
        "P1" | "P2" => r0 == 0.0,
        "P3" => true,
        "P4" => r0 >= 0.0,
        _ => unreachable!(),
    }
}

#[test]
fn lp_and_vertex_nonemptiness_agree_on_fixtures() {
    let cfg = CheckConfig::default();
    for (name, spec, c) in fixture_candidates() {
        for r0 in [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
            let p = upper_kkt_and_polytope(&spec, &c.x, &DVector::from_element(1, r0), &cfg).unwrap();
            assert_eq!(p.is_nonempty(), expected_nonempty(name, r0), "{name}, r0 = {r0}");
            if p.enumerated && p.bounded {
                assert_eq!(p.is_nonempty(), !p.vertices.is_empty(), "{name}, r0 = {r0}");
            }
            for (u, v) in &p.vertices {
                let z = DVector::from_iterator(
                    p.columns.ncols(),
                    u.iter().copied().chain(p.active.iter().map(|&i| v[i])),
                );
                assert!((&p.columns * z + &p.r0).amax() <= 1e-9, "{name}, r0 = {r0}");
                assert!(v.iter().all(|&vi| vi >= 0.0));
            }
        }
    }
}

#[test]
fn vertex_and_lp_maxima_agree_on_bounded_polytopes() {
    let cfg = CheckConfig::default();
    let spec = parse_problem("dims 2 1 0 0 0 3\nf = -y1^2 + x1*y1\nG1 = -x1\nG2 = -x1 - x2\nG3 = -x1 + x2\n").unwrap();
    for r0 in [[1.0, 0.0], [2.0, 0.5], [3.0, -1.0]] {
        let p = upper_kkt_and_polytope(&spec, &[0.0, 0.0], &DVector::from_row_slice(&r0), &cfg).unwrap();
        assert!(p.is_nonempty() && p.bounded && p.enumerated);
        let mut lp_only = p.clone();
        lp_only.enumerated = false;
        for cv in [[1.0, 0.0, 0.0], [0.0, 1.0, -1.0], [-1.0, 2.0, 0.5]] {
            let cv = DVector::from_row_slice(&cv);
            let a = p.max_linear(&DVector::zeros(0), &cv).unwrap();
            let b = lp_only.max_linear(&DVector::zeros(0), &cv).unwrap();
            assert!((a - b).abs() <= 1e-8, "r0 = {r0:?}: {a} vs {b}");
        }
    }
}

fn mfcq_status(a: [f64; 2], b: [f64; 2], scale: f64) -> Status {
    let text = format!(
        "dims 2 1 0 0 0 2\nf = -y1^2\nG1 = ({:e})*x1 + ({:e})*x2\nG2 = ({:e})*x1 + ({:e})*x2\n",
        scale * a[0],
        scale * a[1],
        scale * b[0],
        scale * b[1]
    );
    let spec = parse_problem(&text).unwrap();
    check_mfcq(&spec, &[0.0, 0.0], &CheckConfig::default())
        .unwrap()
        .result
        .status
}

fn row() -> impl Strategy<Value = [f64; 2]> {
    (0.0..std::f64::consts::TAU, 0.2..5.0f64).prop_map(|(t, r)| [r * t.cos(), r * t.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Two active inequality gradients admit a strictly feasible direction
    /// unless they point in opposite directions; rescaling never matters.
    #[test]
    fn mfcq_matches_gordan_and_ignores_scaling(
        a in row(),
        b in row(),
        opposed in any::<bool>(),
        k in 0.2..5.0f64,
        scale in 0.01..100.0f64,
    ) {
        let b = if opposed { [-k * a[0], -k * a[1]] } else { b };
        let cross = a[0] * b[1] - a[1] * b[0];
        let dot = a[0] * b[0] + a[1] * b[1];
        let degenerate = cross.abs() <= 1e-9 * (1.0 + dot.abs()) && dot < 0.0;
        let expected = if degenerate { Status::Violated } else { Status::Satisfied };
        prop_assert_eq!(mfcq_status(a, b, 1.0), expected);
        prop_assert_eq!(mfcq_status(a, b, scale), expected);
    }
}
