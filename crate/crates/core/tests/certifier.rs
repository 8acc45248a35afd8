mod common;

use common::fixture_candidates;
use lmcert_core::fixtures::{p1, p2, p3};
use lmcert_core::report::{Role, Status};
use lmcert_core::{
    certify, verify_minimax_definition, CandidatePoint, CertificateReport, CheckConfig, GridSpec, Verdict,
};

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = CheckConfig::default();
    for (name, spec, c) in fixture_candidates() {
        let a = certify(&spec, &c, &cfg).to_json();
        let b = certify(&spec, &c, &cfg).to_json();
        assert_eq!(a, b, "{name}");
        assert_eq!(CertificateReport::from_json(&a).unwrap().to_json(), a, "{name}");
    }
}

#[test]
fn certified_candidates_pass_the_definition_check() {
    let cfg = CheckConfig::default();
    let grid = GridSpec::default();
    for (spec, name) in [(p1(), "P1"), (p3(), "P3")] {
        let c = CandidatePoint::new(vec![0.0], vec![0.0]);
        assert_eq!(
            certify(&spec, &c, &cfg).verdict,
            Verdict::CertifiedLocalMinimax,
            "{name}"
        );
        let check = verify_minimax_definition(&spec, &c.x, &c.y, &grid).unwrap();
        assert!(check.passed, "{name}: {:?}", check.worst);
    }
}

#[test]
fn first_order_refutations_are_confirmed_by_the_grid() {
    let cfg = CheckConfig::default();
    let grid = GridSpec::default();
    let cases = [(p1(), 0.5, 0.5), (p1(), -0.3, -0.3), (p2(), 0.3, 0.0)];
    for (spec, x, y) in cases {
        let c = CandidatePoint::new(vec![x], vec![y]);
        let report = certify(&spec, &c, &cfg);
        assert_eq!(report.verdict, Verdict::Refuted, "({x}, {y})");
        let witness = report
            .results
            .iter()
            .find(|r| r.role == Role::Necessary && r.status == Status::Violated && r.witness.is_some());
        assert!(witness.is_some(), "({x}, {y}) has no witnessed violation");
        let check = verify_minimax_definition(&spec, &c.x, &c.y, &grid).unwrap();
        assert!(!check.passed, "({x}, {y})");
    }
}
