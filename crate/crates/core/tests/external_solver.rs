//! Runs against an SMT-LIB2 solver when one is configured or on the PATH.

mod common;

use common::fixture;
use hoare2ri::pipeline::{total_correctness, PipelineOptions, Verdict};
use hoare2ri::solver::{SatVerdict, Solver, SolverConfig};
use hoare2ri::syntax::parse_constraint;

fn external() -> Option<Solver> {
    let config = SolverConfig::resolve(None, None);
    if config.command.is_none() {
        eprintln!("no external solver found; skipping");
        return None;
    }
    Some(Solver::new(config))
}

#[test]
fn nonlinear_queries_reach_the_external_solver() {
    let Some(s) = external() else { return };
    // Too large for enumeration, outside the linear fragment.
    let phi = parse_constraint("x * x = 1000000 * y && x > 5000").unwrap();
    let SatVerdict::Sat(m) = s.check_sat(&phi) else { panic!("expected a model") };
    assert!(m.get("x").is_some());
    assert!(s.external_problem().is_none(), "{:?}", s.external_problem());
    assert!(s.stats().external > 0, "{:?}", s.stats());
}

#[test]
fn fixtures_agree_with_and_without_external_solver() {
    let Some(s) = external() else { return };
    let builtin = Solver::builtin();
    for (name, verdict) in [
        ("sum.whl", Verdict::Proved),
        ("sum_neq.whl", Verdict::Unknown),
        ("max.whl", Verdict::Proved),
        ("nested.whl", Verdict::Proved),
    ] {
        let ext = total_correctness(&fixture(name), &s, &PipelineOptions::default());
        let int = total_correctness(&fixture(name), &builtin, &PipelineOptions::default());
        assert_eq!((ext.verdict, int.verdict), (verdict, verdict), "{name}");
    }
    assert_eq!(s.stats().unconfirmed_models, 0);
}
