use lmcert_core::fixtures::{p1, p2};
use lmcert_core::{verify_minimax_definition, GridSpec};
use proptest::prelude::*;

fn coarse(tol: f64) -> GridSpec {
    GridSpec {
        radius: 0.1,
        step: 1e-2,
        levels: 2,
        tol,
        ..GridSpec::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Loosening the tolerance never turns a pass into a failure.
    #[test]
    fn definition_check_is_monotone_in_tolerance(
        x in -0.5..0.5f64,
        t1 in 1e-12..1e-1f64,
        factor in 1.0..100.0f64,
    ) {
        for (spec, y) in [(p1(), x), (p2(), x.min(0.0))] {
            let tight = verify_minimax_definition(&spec, &[x], &[y], &coarse(t1)).unwrap();
            let loose = verify_minimax_definition(&spec, &[x], &[y], &coarse(t1 * factor)).unwrap();
            prop_assert!(!tight.passed || loose.passed);
            prop_assert_eq!(tight.worst_amount(), loose.worst_amount());
        }
    }
}

#[test]
fn non_stationary_points_fail_on_the_right() {
    for x in [-0.4, 0.25] {
        let c = verify_minimax_definition(&p1(), &[x], &[x], &GridSpec::default()).unwrap();
        assert!(!c.passed, "x = {x}");
        let w = c.worst.unwrap();
        assert_eq!(w.side, lmcert_core::oracle::Side::Right);
        assert!(w.x[0].abs() < x.abs());
    }
}
