//! Property tests over randomly generated programs and tableaux.

mod common;

use std::collections::BTreeMap;

use common::*;
use hoare2ri::convert::{convert, make_check_rules, simulate, Simulation};
use hoare2ri::lctrs::{check_orthogonal, check_quasi_reductive};
use hoare2ri::pipeline::{total_correctness, PipelineOptions, Verdict};
use hoare2ri::solver::Solver;
use hoare2ri::termination::{certify_program, search_rank, summarize_loops, verify_rank, LoopOutcome, SearchConfig};
use hoare2ri::whilelang::{interpret, parse_program, print_program, Outcome, Valuation};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn printing_and_parsing_round_trip(seed in any::<u64>()) {
        let src = render(&random_program(seed));
        let ast = parse_program(&src).unwrap();
        let printed = print_program(&ast);
        let again = parse_program(&printed).unwrap();
        prop_assert_eq!(&again, &ast, "{}", printed);
        prop_assert_eq!(print_program(&again), printed);
    }

    #[test]
    fn converted_systems_are_orthogonal_and_quasi_reductive(seed in any::<u64>()) {
        let s = Solver::builtin();
        let ast = parse_program(&render(&random_program(seed))).unwrap();
        let (r, cmap) = convert(&ast).unwrap();
        let orth = check_orthogonal(&r, &s);
        prop_assert!(orth.ok, "{:?}", orth.diagnostics);
        let qr = check_quasi_reductive(&r, &s);
        prop_assert!(qr.ok, "{:?}", qr.diagnostics);
        let post = cond(&mut rng(seed ^ 0x5eed));
        if post.vars().iter().any(|v| !cmap.vars().contains(v)) {
            prop_assert!(make_check_rules(&post, &cmap).is_err());
            return Ok(());
        }
        let all = r.union(&make_check_rules(&post, &cmap).unwrap()).unwrap();
        let orth = check_orthogonal(&all, &s);
        prop_assert!(orth.ok, "{:?}", orth.diagnostics);
        prop_assert!(check_quasi_reductive(&all, &s).ok);
    }

    #[test]
    fn rewriting_simulates_the_interpreter(seed in any::<u64>(), x in -3i64..=3, y in -3i64..=3, z in -3i64..=3) {
        let ast = parse_program(&render(&random_program(seed))).unwrap();
        let (r, cmap) = convert(&ast).unwrap();
        let vals = BTreeMap::from([("x", x), ("y", y), ("z", z)]);
        let theta = Valuation::from_pairs(ast.vars().iter().map(|v| (v.name().to_string(), vals[v.name()])));
        // Rewriting takes one rule step per command plus calculation
        // steps, so the interpreter's budget bounds rule steps from below.
        let fuel = 300;
        match interpret(&ast, &theta, fuel).unwrap() {
            Outcome::Halted { state, .. } => {
                let sim = simulate(&r, &cmap, cmap.start_line(), &theta, 100 * fuel as usize);
                prop_assert!(matches!(&sim, Simulation::Ended { state: s, .. } if *s == state), "{:?}", sim);
            }
            Outcome::OutOfFuel { .. } => {
                let sim = simulate(&r, &cmap, cmap.start_line(), &theta, fuel as usize);
                prop_assert!(matches!(sim, Simulation::OutOfFuel(_)), "{:?}", sim);
            }
        }
    }
}

proptest! {
    #![proptest_config(config(12))]

    /// Valid tableaux never leave the transformation without a case.
    #[test]
    fn valid_loop_free_tableaux_are_proved(seed in any::<u64>()) {
        let src = random_loop_free_tableau(seed);
        let s = solver();
        let report = total_correctness(&parse_program(&src).unwrap(), &s, &PipelineOptions::default());
        prop_assert_eq!(report.verdict, Verdict::Proved, "{}\n{:#?}", src, report.stages);
        prop_assert!(report.final_process.unwrap().is_finished());
    }

    #[test]
    fn valid_loop_tableaux_are_proved(seed in any::<u64>()) {
        let src = random_loop_tableau(seed);
        let s = solver();
        let report = total_correctness(&parse_program(&src).unwrap(), &s, &PipelineOptions::default());
        prop_assert_eq!(report.verdict, Verdict::Proved, "{}\n{:#?}", src, report.stages);
        prop_assert_eq!(report.final_process.unwrap().hypotheses.len(), 1);
    }
}

/// Every rank found by search verifies again on its own.
#[test]
fn found_ranks_reverify() {
    let s = solver();
    for name in ["sum.whl", "nested.whl", "sum_program.whl"] {
        let ast = fixture(name);
        let (r, cmap) = convert(&ast).unwrap();
        for ls in summarize_loops(&r, &cmap, &ast).unwrap() {
            if let Some(cert) = search_rank(&s, &ls, &SearchConfig::default()) {
                let again = verify_rank(&s, &ls, &cert.rank).unwrap();
                assert_eq!(again.rank, cert.rank, "{name}");
            }
        }
    }
}

/// Certified loops halt within the fuel their ranks predict.
#[test]
fn certified_programs_halt_within_rank_fuel() {
    let s = solver();
    let mut r = rng(7);
    for name in ["sum.whl", "max.whl", "nested.whl"] {
        let ast = fixture(name);
        let (rules, cmap) = convert(&ast).unwrap();
        let cert = certify_program(&s, &rules, &cmap, &ast, &BTreeMap::new(), &SearchConfig::default()).unwrap();
        assert!(cert.is_certified(), "{name}");
        for _ in 0..200 {
            let theta = Valuation::from_pairs(
                ast.vars()
                    .iter()
                    .map(|v| (v.name().to_string(), rand::Rng::gen_range(&mut r, -10i64..=10))),
            );
            let fuel = rank_fuel(&cert, &theta, ast.lines().len());
            let out = interpret(&ast, &theta, fuel).unwrap();
            assert!(out.halted().is_some(), "{name} from {theta} exceeded {fuel}");
        }
    }
}

/// Product over loops of (initial rank value + slack) times the longest
/// cycle, plus the program length. Inner ranks are evaluated at the
/// initial state too; the slack of 21 covers the sampled range [-10..10]
/// that inner counters can be reset to.
fn rank_fuel(cert: &hoare2ri::termination::ProgramTermination, theta: &Valuation, len: usize) -> u64 {
    use hoare2ri::termination::Rank;
    use hoare2ri::theory::{eval_with, Value};
    let lookup = |v: &hoare2ri::terms::Var| theta.get(v.name()).map(|n| Value::Int(n.clone()));
    let value = |t: &hoare2ri::terms::Term| -> u64 {
        match eval_with(t, &lookup) {
            Ok(Value::Int(n)) => u64::try_from(n.max(0.into())).unwrap_or(u64::MAX / 4),
            _ => 0,
        }
    };
    let mut total = 1u64;
    for l in &cert.loops {
        let LoopOutcome::Certified { certificate, .. } = &l.outcome else { continue };
        let bound = match &certificate.rank {
            Rank::Single(e) => value(e) + 21,
            Rank::Lex(a, b) => (value(a) + 21) * (value(b) + 21),
        };
        total = total.saturating_mul(bound * (l.summary.max_cycle_len() as u64 + 1));
    }
    total + len as u64
}
