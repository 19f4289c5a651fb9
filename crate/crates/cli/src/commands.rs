use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, Context};
use hoare2ri::convert::{convert, make_check_rules};
use hoare2ri::lctrs::{normalize_innermost, parse_lctrs, parse_term, print_lctrs, print_rules, Lctrs};
use hoare2ri::pipeline::{total_correctness, PipelineOptions, PipelineReport, StageStatus};
use hoare2ri::ri::{read_trace, replay_trace, Process};
use hoare2ri::solver::{Solver, SolverConfig};
use hoare2ri::syntax::parse_int_expr;
use hoare2ri::tableau::{check_all, check_tableau};
use hoare2ri::termination::{LoopOutcome, Rank, SearchConfig};
use hoare2ri::transform::{narrate, Transformation, Transformer};
use hoare2ri::whilelang::{
    interpret, parse_program, parse_program_with_vars, print_numbered, Command, Outcome, Valuation, WhileAst,
};
use num_bigint::BigInt;

use crate::args::{Cmd, GlobalOpts, ProofOpts};

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    /// The input was read but is not acceptable.
    fn invalid(error: anyhow::Error) -> Failure {
        Failure { code: 1, error }
    }

    /// Bad arguments or unreadable files.
    fn usage(error: anyhow::Error) -> Failure {
        Failure { code: 3, error }
    }
}

type Outcome3 = Result<i32, Failure>;

pub fn run(cmd: &Cmd, g: &GlobalOpts) -> Outcome3 {
    match cmd {
        Cmd::Parse { file, json } => cmd_parse(g, file, *json),
        Cmd::Interpret { file, input } => cmd_interpret(g, file, input),
        Cmd::Convert {
            file,
            emit_lctrs,
            with_check,
        } => cmd_convert(g, file, *emit_lctrs, *with_check),
        Cmd::CheckTableau { file, json } => cmd_check(g, file, *json),
        Cmd::Transform { file, proof, replay } => cmd_transform(g, file, proof, replay.as_deref()),
        Cmd::Prove {
            file,
            proof,
            rank,
            json,
            report,
        } => cmd_prove(g, file, proof, rank, *json, report.as_deref()),
        Cmd::Rewrite { file, term } => cmd_rewrite(g, file, term),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::usage)
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    if path.as_os_str() == "-" {
        print!("{text}");
        return Ok(());
    }
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::usage)
}

fn load_program(g: &GlobalOpts, path: &Path) -> Result<WhileAst, Failure> {
    let src = read(path)?;
    let parsed = if g.vars.is_empty() {
        parse_program(&src)
    } else {
        let vars: Vec<&str> = g.vars.iter().map(String::as_str).collect();
        parse_program_with_vars(&src, &vars)
    };
    parsed
        .map_err(|e| anyhow!("{}: {e}", path.display()))
        .map_err(Failure::invalid)
}

pub fn make_solver(g: &GlobalOpts) -> Solver {
    let config = if g.builtin {
        SolverConfig::builtin()
    } else {
        SolverConfig::resolve(g.solver_cmd.as_deref(), g.timeout_ms.map(Duration::from_millis))
    };
    match &config.command {
        None if !g.builtin => eprintln!("warning: no external solver found; using the builtin fallback"),
        Some(cmd) if !program_exists(&cmd[0]) => {
            eprintln!("warning: external solver `{}` not found; queries will use the builtin fallback", cmd[0])
        }
        _ => {}
    }
    Solver::new(config)
}

// The session starts lazily, so a bad command would otherwise go unnoticed
// whenever the builtin stages answer every query.
fn program_exists(prog: &str) -> bool {
    let p = std::path::Path::new(prog);
    if p.components().count() > 1 {
        return p.is_file();
    }
    std::env::var_os("PATH")
        .map(|path| std::env::split_paths(&path).any(|d| d.join(prog).is_file()))
        .unwrap_or(false)
}

fn warn_solver(solver: &Solver) {
    if let Some(p) = solver.external_problem() {
        eprintln!("warning: external solver unusable ({p}); used the builtin fallback");
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

fn cmd_parse(g: &GlobalOpts, file: &Path, json: bool) -> Outcome3 {
    let ast = load_program(g, file)?;
    if json {
        print!("{}", to_json(&ast));
    } else {
        print!("{}", print_numbered(&ast));
    }
    Ok(0)
}

/// Parses `x=3` pairs over the program variables.
fn parse_input(ast: &WhileAst, input: &[String]) -> Result<Valuation, Failure> {
    let mut theta = Valuation::new();
    for v in ast.vars() {
        theta.set(v.clone(), BigInt::from(0));
    }
    for item in input.iter().filter(|s| !s.trim().is_empty()) {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::usage(anyhow!("expected VAR=N, got '{item}'")))?;
        let name = name.trim();
        let var = ast
            .vars()
            .iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Failure::usage(anyhow!("'{name}' is not a variable of the program")))?;
        let n: BigInt = value
            .trim()
            .parse()
            .map_err(|_| Failure::usage(anyhow!("'{value}' is not an integer")))?;
        theta.set(var.clone(), n);
    }
    Ok(theta)
}

fn show_valuation(ast: &WhileAst, theta: &Valuation) -> String {
    ast.vars()
        .iter()
        .map(|v| format!("{}={}", v.name(), theta.get(v.name()).map(|n| n.to_string()).unwrap_or_default()))
        .collect::<Vec<_>>()
        .join(",")
}

fn cmd_interpret(g: &GlobalOpts, file: &Path, input: &[String]) -> Outcome3 {
    let ast = load_program(g, file)?;
    let theta = parse_input(&ast, input)?;
    match interpret(&ast, &theta, g.fuel).map_err(|e| Failure::invalid(e.into()))? {
        Outcome::Halted { state, .. } => {
            println!("{}", show_valuation(&ast, &state));
            Ok(0)
        }
        Outcome::OutOfFuel { line, state } => {
            eprintln!("out of fuel after {} steps at line {line}", g.fuel);
            println!("{}", show_valuation(&ast, &state));
            Ok(2)
        }
    }
}

/// `R_P`, joined with the check rules when the program is annotated.
fn system_of(ast: &WhileAst, with_check: bool) -> Result<Lctrs, Failure> {
    let (r, cmap) = convert(ast).map_err(|e| Failure::invalid(e.into()))?;
    if !with_check {
        return Ok(r);
    }
    let post = ast
        .assertions()
        .last()
        .map(|(_, t)| t.clone())
        .ok_or_else(|| Failure::invalid(anyhow!("the program has no assertions to build check rules from")))?;
    let chk = make_check_rules(&post, &cmap).map_err(|e| Failure::invalid(e.into()))?;
    r.union(&chk).map_err(|e| Failure::invalid(e.into()))
}

fn cmd_convert(g: &GlobalOpts, file: &Path, emit_lctrs: bool, with_check: bool) -> Outcome3 {
    let ast = load_program(g, file)?;
    let r = system_of(&ast, with_check)?;
    if emit_lctrs {
        print!("{}", print_lctrs(&r));
    } else {
        print!("{}", print_rules(&r));
    }
    Ok(0)
}

fn cmd_check(g: &GlobalOpts, file: &Path, json: bool) -> Outcome3 {
    let ast = load_program(g, file)?;
    let solver = make_solver(g);
    let obligations = check_all(&ast, &solver);
    warn_solver(&solver);
    if json {
        print!("{}", to_json(&obligations));
    } else {
        for o in &obligations {
            println!("{o}");
        }
    }
    Ok(if obligations.iter().any(|o| o.status.is_violated()) {
        1
    } else if obligations.iter().all(|o| o.status.is_discharged()) {
        0
    } else {
        2
    })
}

fn emit_proof(ast: &WhileAst, t: &Transformation, proof: &ProofOpts) -> Result<(), Failure> {
    if let Some(path) = &proof.emit_proof {
        write_out(path, &to_json(&t.trace()))?;
    }
    if proof.narrate {
        print!("{}", narrate(ast, t));
    }
    Ok(())
}

fn cmd_transform(g: &GlobalOpts, file: &Path, proof: &ProofOpts, replay: Option<&Path>) -> Outcome3 {
    let ast = load_program(g, file)?;
    let solver = make_solver(g);
    if let Err(e) = check_tableau(&ast, &solver) {
        eprintln!("error: not a valid proof tableau: {e}");
        return Ok(if e.obligations().iter().any(|o| o.status.is_violated()) { 1 } else { 2 });
    }
    let transformer = Transformer::new(&ast, &solver).map_err(|e| Failure::invalid(e.into()))?;

    if let Some(trace_path) = replay {
        let records = read_trace(&read(trace_path)?).map_err(|e| Failure::invalid(e.into()))?;
        let start = Process::start(vec![transformer.goal().clone()]);
        return match replay_trace(transformer.context(), &start, &records) {
            Ok((_, end)) if end.is_finished() => {
                println!("replayed {} steps; final process {end}", records.len());
                Ok(0)
            }
            Ok((_, end)) => {
                println!("replayed {} steps; equations remain in {end}", records.len());
                Ok(1)
            }
            Err(e) => {
                println!("replay rejected: {e}");
                Ok(1)
            }
        };
    }

    let t = match transformer.trans() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            warn_solver(&solver);
            return Ok(if e.is_unknown() { 2 } else { 1 });
        }
    };
    warn_solver(&solver);
    emit_proof(&ast, &t, proof)?;
    if !proof.narrate {
        for s in &t.steps {
            println!("{}", s.step.summary());
        }
        println!("final process {}", t.final_process());
    }
    Ok(0)
}

/// `[LINE=]EXPR` with `E1;E2` for a lexicographic pair. Without a line
/// the rank belongs to the first loop.
fn parse_rank(ast: &WhileAst, spec: &str) -> Result<(usize, Rank), Failure> {
    let bad = |msg: String| Failure::usage(anyhow!("--rank {spec}: {msg}"));
    let (line, expr) = match spec.split_once('=') {
        Some((l, e)) if !l.trim().is_empty() && l.trim().chars().all(|c| c.is_ascii_digit()) => {
            (Some(l.trim().parse::<usize>().map_err(|e| bad(e.to_string()))?), e)
        }
        _ => (None, spec),
    };
    let headers: Vec<usize> = ast
        .lines()
        .iter()
        .filter(|l| matches!(l.command, Command::WhileOpen { .. }))
        .map(|l| l.number)
        .collect();
    let line = match line {
        Some(l) if headers.contains(&l) => l,
        Some(l) => return Err(bad(format!("line {l} is not a loop header"))),
        None => *headers.first().ok_or_else(|| bad("the program has no loop".into()))?,
    };
    let parse = |e: &str| parse_int_expr(e.trim()).map_err(|err| bad(err.to_string()));
    let rank = match expr.split_once(';') {
        Some((a, b)) => Rank::Lex(parse(a)?, parse(b)?),
        None => Rank::Single(parse(expr)?),
    };
    Ok((line, rank))
}

fn render_report(r: &PipelineReport) -> String {
    let mut s = String::new();
    for st in &r.stages {
        let status = match st.status {
            StageStatus::Ok => "ok",
            StageStatus::Failed => "FAILED",
            StageStatus::Unknown => "unknown",
        };
        let name = serde_json::to_value(st.stage).ok().and_then(|v| v.as_str().map(str::to_string));
        let _ = writeln!(s, "{:<12} {:<8} {} ({} ms)", name.unwrap_or_default(), status, st.detail, st.millis);
    }
    for o in r.obligations.iter().filter(|o| !o.status.is_discharged()) {
        let _ = writeln!(s, "  {o}");
    }
    if let Some(t) = &r.termination {
        for l in &t.loops {
            match &l.outcome {
                LoopOutcome::Certified { certificate, .. } => {
                    let _ = writeln!(s, "  loop at line {}: rank {}", l.header, certificate.rank);
                }
                LoopOutcome::Uncertified { reason, .. } => {
                    let _ = writeln!(s, "  loop at line {}: no rank ({reason})", l.header);
                }
            }
        }
    }
    if let Some(p) = &r.final_process {
        let _ = writeln!(s, "final process {p}");
        for h in &p.hypotheses {
            let _ = writeln!(s, "  {}: {h}", h.id());
        }
    }
    let _ = writeln!(s, "verdict: {}", r.verdict);
    s
}

fn cmd_prove(
    g: &GlobalOpts,
    file: &Path,
    proof: &ProofOpts,
    ranks: &[String],
    json: bool,
    report_path: Option<&Path>,
) -> Outcome3 {
    let ast = load_program(g, file)?;
    let mut opts = PipelineOptions {
        ranks: BTreeMap::new(),
        search: SearchConfig {
            seed: g.seed,
            ..SearchConfig::default()
        },
    };
    for spec in ranks {
        let (line, rank) = parse_rank(&ast, spec)?;
        opts.ranks.insert(line, rank);
    }
    let solver = make_solver(g);
    let report = total_correctness(&ast, &solver, &opts);
    warn_solver(&solver);

    if proof.emit_proof.is_some() || proof.narrate {
        // The derivation is deterministic, so it is rebuilt for output.
        if let Ok(t) = Transformer::new(&ast, &solver).and_then(|tr| tr.trans()) {
            emit_proof(&ast, &t, proof)?;
        }
    }
    if let Some(path) = report_path {
        write_out(path, &to_json(&report))?;
    }
    if json {
        print!("{}", to_json(&report));
    } else {
        print!("{}", render_report(&report));
    }
    Ok(report.verdict.exit_code())
}

fn cmd_rewrite(g: &GlobalOpts, file: &Path, term: &str) -> Outcome3 {
    let r = if file.extension().is_some_and(|e| e == "whl") {
        let ast = load_program(g, file)?;
        system_of(&ast, ast.has_assertions())?
    } else {
        parse_lctrs(&read(file)?).map_err(|e| Failure::invalid(e.into()))?
    };
    let t = parse_term(&r, term).map_err(|e| Failure::usage(anyhow!("--term: {e}")))?;
    let fuel = usize::try_from(g.fuel).unwrap_or(usize::MAX);
    let (nf, steps) = normalize_innermost(&r, &t, fuel);
    println!("{t}");
    for s in &steps {
        println!("  -> {}    [{} at {}]", s.result, s.rule, s.position);
    }
    println!("normal form after {} steps: {nf}", steps.len());
    Ok(if steps.len() == fuel { 2 } else { 0 })
}
