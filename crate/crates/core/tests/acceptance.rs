//! Acceptance criteria 1 to 10, one PASS/FAIL line each.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use hoare2ri::convert::{convert, make_check_rules, simulate, Simulation};
use hoare2ri::lctrs::{check_orthogonal, check_quasi_reductive, normalize_innermost, parse_lctrs, parse_term, print_rules};
use hoare2ri::pipeline::{total_correctness, PipelineOptions, Verdict};
use hoare2ri::ri::{read_trace, replay_trace, InferenceRule, Process, StepRecord};
use hoare2ri::solver::{Solver, SolverStats};
use hoare2ri::tableau::check_tableau;
use hoare2ri::terms::{Substitution, Term};
use hoare2ri::termination::{lift_termination, search_rank, summarize_loops, verify_rank, SearchConfig};
use hoare2ri::theory::Op;
use hoare2ri::transform::{Transformation, Transformer};
use hoare2ri::whilelang::{interpret, parse_program, print_program, Command, Line, Outcome, Valuation, WhileAst};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn transformation<'a>(ast: &'a WhileAst, solver: &'a Solver) -> (Transformer<'a>, Transformation) {
    let tr = Transformer::new(ast, solver).unwrap();
    let t = tr.trans().unwrap();
    (tr, t)
}

const SUM_STEPS: [&str; 15] = [
    "Generalization A1 -> A2",
    "Simplification A2 -> A3",
    "Generalization A3 -> A4",
    "Simplification A4 -> A5",
    "Generalization A5 -> A6",
    "Expansion A6 -> A7,A11",
    "Generalization A7 -> A8",
    "Simplification A8 -> A9",
    "Simplification A9 -> A10",
    "Simplification A10 -> B1",
    "Simplification B1 -> B2",
    "Deletion B2 -> ",
    "Generalization A11 -> B3",
    "Simplification B3 -> B4",
    "Deletion B4 -> ",
];

fn worked_example(solver: &Solver) -> Check {
    let ast = fixture("sum.whl");
    let labels = ast.assertion_labels();
    let a: BTreeMap<String, Term> = ast.assertions().map(|(l, t)| (labels[&l.number].clone(), t.clone())).collect();
    ensure(a.len() == 12, || format!("{} assertions", a.len()))?;

    let clock = Instant::now();
    let report = total_correctness(&ast, solver, &PipelineOptions::default());
    let external = clock.elapsed();
    ensure(report.verdict == Verdict::Proved, || format!("verdict {}", report.verdict))?;

    let (_, t) = transformation(&ast, solver);
    let steps: Vec<String> = t.steps.iter().map(|s| s.step.summary()).collect();
    ensure(steps == SUM_STEPS, || format!("step order {steps:?}"))?;
    let eq = |label: &str| {
        t.steps
            .iter()
            .flat_map(|s| s.step.after.equations.iter())
            .find(|e| e.label == label)
            .cloned()
            .ok_or_else(|| format!("no equation {label}"))
    };
    for n in 2..=11 {
        let label = format!("A{n}");
        let e = eq(&label)?;
        ensure(e.constraint == a[&label], || format!("{label} is {}", e.body()))?;
    }
    let expected = [
        ("B1", format!("chk(state9(x,i,z)) ≈ true [{}]", a["A10"])),
        ("B2", format!("true ≈ true [{}]", a["A10"])),
        ("B3", format!("chk(end(x,i,z)) ≈ true [{}]", a["A12"])),
        ("B4", format!("true ≈ true [{}]", a["A12"])),
    ];
    for (label, body) in expected {
        let e = eq(label)?;
        ensure(e.body() == body, || format!("{label} is {}, expected {body}", e.body()))?;
    }
    let last = t.final_process();
    ensure(last.to_string() == "(∅, {A6})", || format!("final process {last}"))?;

    let builtin = Solver::builtin();
    let clock = Instant::now();
    let fallback = total_correctness(&ast, &builtin, &PipelineOptions::default());
    let slow = clock.elapsed();
    ensure(fallback.verdict == Verdict::Proved, || format!("builtin verdict {}", fallback.verdict))?;
    ensure(slow < Duration::from_secs(30), || format!("builtin run took {slow:?}"))?;
    let with = if solver.config().command.is_some() {
        ensure(external < Duration::from_secs(10), || format!("run took {external:?}"))?;
        format!("{external:?} with external solver, ")
    } else {
        String::new()
    };
    Ok(format!("15 steps in order, (∅, {{A6}}), {with}{slow:?} builtin"))
}

fn conversion_fidelity() -> Check {
    let (r, _) = convert(&fixture("sum_program.whl")).unwrap();
    let expected = "\
l1: state1(x,i,z) -> state2(x,0,z)
l2: state2(x,i,z) -> state3(x,i,0)
l3+: state3(x,i,z) -> state4(x,i,z) [x > i]
l3-: state3(x,i,z) -> end(x,i,z) [!(x > i)]
l4: state4(x,i,z) -> state5(x,i,z + i + 1)
l5: state5(x,i,z) -> state6(x,i + 1,z)
l6: state6(x,i,z) -> state3(x,i,z)
";
    let got = print_rules(&r);
    ensure(got == expected, || format!("got\n{got}"))?;
    Ok("7 rules match".into())
}

fn co_simulation() -> Check {
    let ast = fixture("sum_program.whl");
    let (r, cmap) = convert(&ast).unwrap();
    let mut n = 0;
    for x in -4..=8 {
        for i in -3..=3 {
            for z in -3..=3 {
                let theta = Valuation::from_pairs([("x", x), ("i", i), ("z", z)]);
                let Outcome::Halted { state, .. } = interpret(&ast, &theta, 10_000).unwrap() else {
                    return Err(format!("interpreter diverged from {theta}"));
                };
                match simulate(&r, &cmap, cmap.start_line(), &theta, 100_000) {
                    Simulation::Ended { state: s, .. } if s == state => n += 1,
                    other => return Err(format!("from {theta}: {other:?} vs {state}")),
                }
            }
        }
    }
    Ok(format!("{n} valuations, 0 discrepancies"))
}

fn factorial() -> Check {
    let r = parse_lctrs(&fixture_src("fact.lctrs")).unwrap();
    let run = |src: &str| normalize_innermost(&r, &parse_term(&r, src).unwrap(), 1000);
    let (nf, steps) = run("fact(3)");
    ensure(nf == Term::int(6) && steps.len() == 10, || format!("fact(3) -> {nf} in {}", steps.len()))?;
    let (nf, steps) = run("3 - 1");
    ensure(nf == Term::int(2) && steps.len() == 1 && steps[0].rule == "calc:-", || {
        format!("3 - 1 -> {nf} via {:?}", steps.iter().map(|s| &s.rule).collect::<Vec<_>>())
    })?;
    let (nf, steps) = run("3 * (2 * (1 * 1))");
    ensure(nf == Term::int(6) && steps.len() == 3 && steps.iter().all(|s| s.rule == "calc:*"), || {
        format!("product -> {nf} in {}", steps.len())
    })?;
    Ok("fact(3) = 6 in 10 steps; 1 and 3 calculation steps".into())
}

fn rule_properties(solver: &Solver) -> Check {
    for seed in 0..100u64 {
        let src = render(&random_program(seed));
        let ast = parse_program(&src).unwrap();
        let (r, cmap) = convert(&ast).unwrap();
        // Variables the program never mentions are fixed to 0 in the post.
        let mut post = cond(&mut rng(seed + 1000));
        let outside: Vec<_> = post.vars().into_iter().filter(|v| !cmap.vars().contains(v)).collect();
        post = post.apply(&Substitution::from_pairs(outside.into_iter().map(|v| (v, Term::int(0)))).unwrap());
        let all = r.union(&make_check_rules(&post, &cmap).unwrap()).unwrap();
        for (name, sys) in [("R_P", &r), ("R_P with check rules", &all)] {
            let o = check_orthogonal(sys, solver);
            ensure(o.ok, || format!("seed {seed}: {name} not orthogonal: {:?}\n{src}", o.diagnostics))?;
            let q = check_quasi_reductive(sys, solver);
            ensure(q.ok, || format!("seed {seed}: {name} not quasi-reductive: {:?}\n{src}", q.diagnostics))?;
        }
    }
    Ok("100 programs orthogonal and quasi-reductive".into())
}

/// Negates the first comparison in `t`, in prefix order.
fn flip_first(t: &Term) -> Option<Term> {
    match t {
        Term::Op(op, args) if op.is_comparison() => {
            let (a, b) = (args[0].clone(), args[1].clone());
            Some(match op {
                Op::Ge => Term::op(Op::Gt, vec![b, a]),
                Op::Gt => Term::op(Op::Ge, vec![b, a]),
                Op::Eq => Term::op(Op::Ne, vec![a, b]),
                Op::Ne => Term::op(Op::Eq, vec![a, b]),
                _ => return None,
            })
        }
        Term::Op(op, args) => {
            for (k, a) in args.iter().enumerate() {
                if let Some(f) = flip_first(a) {
                    let mut args = args.clone();
                    args[k] = f;
                    return Some(Term::op(*op, args));
                }
            }
            None
        }
        _ => None,
    }
}

fn rejected(ast: &WhileAst, solver: &Solver) -> bool {
    if check_tableau(ast, solver).is_err() {
        return true;
    }
    match Transformer::new(ast, solver) {
        Err(_) => true,
        Ok(tr) => tr.trans().is_err(),
    }
}

fn mutation_soundness(solver: &Solver) -> Check {
    let ast = fixture("sum.whl");
    let mut caught = 0;
    let mut total = 0;
    let mut missed = Vec::new();
    for (k, line) in ast.lines().iter().enumerate() {
        let Command::Assert { cond } = &line.command else { continue };
        total += 1;
        let flipped = flip_first(cond).ok_or_else(|| format!("line {} has no comparison", line.number))?;
        let mut lines: Vec<Line> = ast.lines().to_vec();
        lines[k].command = Command::Assert { cond: flipped };
        let mutant = WhileAst::new(lines, Some(ast.vars().to_vec())).unwrap();
        // The mutant must also survive printing, as a user would write it.
        let mutant = parse_program(&print_program(&mutant)).unwrap();
        if rejected(&mutant, solver) {
            caught += 1;
        } else {
            missed.push(line.number);
        }
    }
    ensure(total == 12 && caught == total, || format!("{caught}/{total} rejected, missed lines {missed:?}"))?;
    Ok(format!("{caught}/{total} mutants rejected"))
}

fn negative_termination(solver: &Solver) -> Check {
    let ast = fixture("sum_neq.whl");
    let report = total_correctness(&ast, solver, &PipelineOptions::default());
    ensure(report.verdict == Verdict::Unknown, || format!("verdict {}", report.verdict))?;

    // The loop on its own, entered at the header from (0, 1, 0).
    let program = print_program(&ast.strip_annotations());
    let from_loop: String = program
        .lines()
        .skip_while(|l| !l.trim_start().starts_with("while"))
        .map(|l| format!("{l}\n"))
        .collect();
    let lp = parse_program(&from_loop).unwrap();
    let theta = Valuation::from_pairs([("x", 0), ("i", 1), ("z", 0)]);
    let out = interpret(&lp, &theta, 10_000).unwrap();
    ensure(matches!(out, Outcome::OutOfFuel { .. }), || format!("interpreter: {out:?}"))?;

    let (r, cmap) = convert(&ast).unwrap();
    let header = ast
        .lines()
        .iter()
        .find(|l| matches!(l.command, Command::WhileOpen { .. }))
        .unwrap()
        .number;
    let sim = simulate(&r, &cmap, header, &theta, 10_000);
    ensure(matches!(sim, Simulation::OutOfFuel(_)), || format!("rewriting: {sim:?}"))?;
    Ok("verdict unknown; (0,1,0) runs out of fuel in both semantics".into())
}

/// One semantic change to a record, chosen by `kind`.
fn tamper(records: &mut Vec<StepRecord>, k: usize, kind: usize) -> String {
    let r = &mut records[k];
    match kind {
        0 => {
            r.before.replace_range(0..1, if r.before.starts_with('0') { "1" } else { "0" });
            "before digest".into()
        }
        1 => {
            r.after.replace_range(0..1, if r.after.starts_with('0') { "1" } else { "0" });
            "after digest".into()
        }
        2 => {
            r.target.push('x');
            "target".into()
        }
        3 => match (&r.constraint, r.rule) {
            (Some(c), _) => {
                r.constraint = Some(format!("{c} && x >= 1"));
                "constraint".into()
            }
            (None, _) => {
                r.rule = if r.rule == InferenceRule::Deletion {
                    InferenceRule::Generalization
                } else {
                    InferenceRule::Deletion
                };
                "rule".into()
            }
        },
        4 => match &r.rule_id {
            Some(id) => {
                r.rule_id = Some(if id == "l12" { "l14".into() } else { "l12".into() });
                "rule id".into()
            }
            None => {
                r.labels = vec!["Z9".into()];
                "labels".into()
            }
        },
        5 => match &r.position {
            Some(p) => {
                r.position = Some(if p == "ε" { "1".into() } else { "ε".into() });
                "position".into()
            }
            None => {
                records.remove(k);
                "dropped step".into()
            }
        },
        _ => {
            if k + 1 < records.len() {
                records.swap(k, k + 1);
                "swapped steps".into()
            } else {
                records.remove(k);
                "dropped step".into()
            }
        }
    }
}

fn replay_integrity(solver: &Solver) -> Check {
    let mut replayed = 0;
    let mut traces = Vec::new();
    for name in ["sum.whl", "sum_neq.whl", "max.whl", "nested.whl"] {
        let ast = fixture(name);
        let (tr, t) = transformation(&ast, solver);
        let json = serde_json::to_string_pretty(&t.trace()).unwrap();
        let records = read_trace(&json).map_err(|e| format!("{name}: {e}"))?;
        let start = Process::start(vec![tr.goal().clone()]);
        let (_, end) = replay_trace(tr.context(), &start, &records).map_err(|e| format!("{name}: {e}"))?;
        ensure(end == *t.final_process(), || format!("{name}: replay ends in {end}"))?;
        replayed += records.len();
        traces.push((ast, records, t.final_process().digest()));
    }

    let mut r = rng(20);
    let mut detected = 0;
    for n in 0..20 {
        let (ast, records, final_digest) = &traces[n % traces.len()];
        let tr = Transformer::new(ast, solver).unwrap();
        let start = Process::start(vec![tr.goal().clone()]);
        let mut bad = records.clone();
        let k = r.gen_range(0..bad.len());
        let what = tamper(&mut bad, k, r.gen_range(0..7));
        match replay_trace(tr.context(), &start, &bad) {
            Err(_) => detected += 1,
            Ok((_, end)) if end.digest() != *final_digest => detected += 1,
            Ok(_) => return Err(format!("tampering {n} ({what} at step {k}) went unnoticed")),
        }
    }
    Ok(format!("{replayed} steps replayed, {detected}/20 tamperings detected"))
}

fn ranking(solver: &Solver) -> Check {
    let ast = fixture("sum.whl");
    let (r, cmap) = convert(&ast).unwrap();
    let loops = summarize_loops(&r, &cmap, &ast).unwrap();
    ensure(loops.len() == 1, || format!("{} loops", loops.len()))?;
    let cert = search_rank(solver, &loops[0], &SearchConfig::default()).ok_or("no rank found")?;
    ensure(cert.rank.to_string() == "x - i", || format!("found {}", cert.rank))?;
    verify_rank(solver, &loops[0], &cert.rank).map_err(|e| format!("{e:?}"))?;

    let program = hoare2ri::termination::certify_program(solver, &r, &cmap, &ast, &BTreeMap::new(), &SearchConfig::default())
        .unwrap();
    let (_, t) = transformation(&ast, solver);
    let post = ast.assertions().last().unwrap().1.clone();
    let check = make_check_rules(&post, &cmap).unwrap();
    let lift = lift_termination(Some(&program), check.rules(), &t.final_process().hypotheses);
    ensure(lift.is_terminating(), || format!("{lift:?}"))?;
    ensure(!lift_termination(None, check.rules(), &t.final_process().hypotheses).is_terminating(), || {
        "lifted without a certificate".into()
    })?;
    Ok("rank x - i certified; rules with check rules and {A6} terminate".into())
}

fn solver_independence(stats: &[SolverStats]) -> Check {
    let unconfirmed: u64 = stats.iter().map(|s| s.unconfirmed_models).sum();
    let queries: u64 = stats.iter().map(|s| s.queries).sum();
    ensure(unconfirmed == 0, || format!("{unconfirmed} unconfirmed models"))?;
    Ok(format!("0 unconfirmed models over {queries} queries"))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn main() {
    let solver = solver();
    let builtin = Solver::builtin();
    let criteria: Vec<Criterion> = vec![
        ("worked-example reproduction", Box::new(|| worked_example(&solver))),
        ("conversion fidelity", Box::new(conversion_fidelity)),
        ("co-simulation", Box::new(co_simulation)),
        ("factorial rewriting", Box::new(factorial)),
        ("orthogonality and quasi-reductivity", Box::new(|| rule_properties(&builtin))),
        ("mutation soundness", Box::new(|| mutation_soundness(&solver))),
        ("negative termination", Box::new(|| negative_termination(&solver))),
        ("replay integrity", Box::new(|| replay_integrity(&solver))),
        ("ranking certification", Box::new(|| ranking(&solver))),
    ];
    let mut failed = 0;
    let mut report = |n: usize, name: &str, result: Check| match result {
        Ok(detail) => println!("PASS  {n:>2}  {name}: {detail}"),
        Err(detail) => {
            failed += 1;
            println!("FAIL  {n:>2}  {name}: {detail}");
        }
    };
    for (k, (name, run)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        report(k + 1, name, result);
    }
    report(10, "solver independence", solver_independence(&[solver.stats(), builtin.stats()]));
    if failed > 0 {
        std::process::exit(1);
    }
}
