//! Termination certificates for converted programs.
//!
//! Every backward rule of a converted program is the closing line of a
//! `while`, so an infinite rewrite sequence passes some loop header
//! infinitely often. Each loop is summarized by its header-to-header
//! cycles (inner loops collapsed into one havocking step), and a linear
//! ranking expression is checked to be bounded and strictly decreasing on
//! every cycle. The union with the check rules and oriented hypotheses is
//! then terminating because those rules are rooted at `chk` and rewrite to
//! a truth value.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::convert::{ConversionMap, CHK};
use crate::lctrs::{ConstrainedRule, Lctrs};
use crate::solver::{Model, Solver, SolverVerdict};
use crate::terms::{match_term, Sort, Substitution, Term, Var};
use crate::theory::{build, eval_in, Value};
use crate::whilelang::{Block, Command, WhileAst};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TerminationError {
    #[error("rule {0} is not a transition between program states")]
    NotConverterShaped(String),
}

fn ser_display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn ser_terms<S: Serializer>(ts: &[Term], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(ts.iter().map(|t| t.to_string()))
}

/// One transition `state_from(x⃗) → state_to(u⃗) [guard]` over the program variables.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Edge {
    id: String,
    from: usize,
    to: usize,
    guard: Term,
    update: Vec<Term>,
}

/// A path from a loop header back to it with its composed effect.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cycle {
    /// Rule ids along the path; `havoc@n` stands for the inner loop at line `n`.
    pub path: Vec<String>,
    /// Condition on the values at the header for the path to be taken.
    #[serde(serialize_with = "ser_display")]
    pub guard: Term,
    /// Values of the program variables when the header is reached again.
    #[serde(serialize_with = "ser_terms")]
    pub update: Vec<Term>,
}

impl Cycle {
    /// `{x_k ↦ u_k}`.
    pub fn substitution(&self, vars: &[Var]) -> Substitution {
        Substitution::from_pairs(vars.iter().cloned().zip(self.update.iter().cloned())).expect("integer updates")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoopSummary {
    pub header: usize,
    pub symbol: String,
    pub close: usize,
    pub cycles: Vec<Cycle>,
    #[serde(skip)]
    vars: Vec<Var>,
}

impl LoopSummary {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Length of the longest cycle, in rewrite steps.
    pub fn max_cycle_len(&self) -> usize {
        self.cycles.iter().map(|c| c.path.len()).max().unwrap_or(0)
    }
}

fn edges(r: &Lctrs, cmap: &ConversionMap) -> Result<Vec<Edge>, TerminationError> {
    let canon = cmap.var_terms();
    let mut out = Vec::new();
    for rule in r.rules() {
        let shape = || TerminationError::NotConverterShaped(rule.id().to_string());
        let line_of = |t: &Term| t.root_fun().and_then(|f| cmap.line_of(f.name()));
        let (from, to) = (line_of(rule.lhs()).ok_or_else(shape)?, line_of(rule.rhs()).ok_or_else(shape)?);
        let from_state = cmap.state(from, canon.clone()).ok_or_else(shape)?;
        let rename = match_term(rule.lhs(), &from_state).ok_or_else(shape)?;
        out.push(Edge {
            id: rule.id().to_string(),
            from,
            to,
            guard: rule.guard().apply(&rename),
            update: rule.rhs().args().iter().map(|t| t.apply(&rename)).collect(),
        });
    }
    Ok(out)
}

/// Variables assigned somewhere between lines `open` and `close`.
fn assigned_between(ast: &WhileAst, open: usize, close: usize) -> BTreeSet<Var> {
    ast.lines()
        .iter()
        .filter(|l| l.number > open && l.number < close)
        .filter_map(|l| match &l.command {
            Command::Assign { var, .. } => Some(var.clone()),
            _ => None,
        })
        .collect()
}

struct Walk {
    path: Vec<String>,
    guards: Vec<Term>,
    values: Vec<Term>,
}

impl Walk {
    fn subst(&self, vars: &[Var]) -> Substitution {
        Substitution::from_pairs(vars.iter().cloned().zip(self.values.iter().cloned())).expect("integer values")
    }

    fn take(&self, e: &Edge, vars: &[Var]) -> Walk {
        let s = self.subst(vars);
        let mut guards = self.guards.clone();
        if e.guard != Term::tt() {
            guards.push(e.guard.apply(&s));
        }
        let mut path = self.path.clone();
        path.push(e.id.clone());
        Walk {
            path,
            guards,
            values: e.update.iter().map(|t| t.apply(&s)).collect(),
        }
    }
}

/// One summary per `while` header, outermost first.
pub fn summarize_loops(r: &Lctrs, cmap: &ConversionMap, ast: &WhileAst) -> Result<Vec<LoopSummary>, TerminationError> {
    let edges = edges(r, cmap)?;
    let vars = cmap.vars().to_vec();
    let mut loops: Vec<(usize, usize)> = ast
        .blocks()
        .filter_map(|b| match b {
            Block::While { open, close } => Some((*open, *close)),
            _ => None,
        })
        .collect();
    loops.sort();
    let mut out = Vec::new();
    for &(open, close) in &loops {
        let inside = |line: usize| line > open && line <= close;
        let mut cycles = Vec::new();
        let mut stack = vec![(
            open,
            Walk {
                path: Vec::new(),
                guards: Vec::new(),
                values: cmap.var_terms(),
            },
        )];
        while let Some((at, walk)) = stack.pop() {
            if at == open && !walk.path.is_empty() {
                cycles.push(Cycle {
                    path: walk.path,
                    guard: build::conj(walk.guards),
                    update: walk.values,
                });
                continue;
            }
            let mut walk = walk;
            let inner = loops.iter().find(|(o, _)| *o == at && at != open).copied();
            if let Some((iopen, iclose)) = inner {
                walk = havoc(ast, &vars, walk, iopen, iclose);
            }
            for e in edges.iter().filter(|e| e.from == at).rev() {
                let stays_out_of_inner = match inner {
                    Some((iopen, iclose)) => !(e.to > iopen && e.to <= iclose),
                    None => true,
                };
                if (inside(e.to) || e.to == open) && stays_out_of_inner {
                    stack.push((e.to, walk.take(e, &vars)));
                }
            }
        }
        out.push(LoopSummary {
            header: open,
            symbol: cmap.symbol(open).map(|f| f.name().to_string()).unwrap_or_default(),
            close,
            cycles,
            vars: vars.clone(),
        });
    }
    Ok(out)
}

/// Replaces the variables an inner loop assigns by fresh values that
/// satisfy its invariant, if it has one.
fn havoc(ast: &WhileAst, vars: &[Var], walk: Walk, open: usize, close: usize) -> Walk {
    let changed = assigned_between(ast, open, close);
    let mut values = walk.values.clone();
    for (k, v) in vars.iter().enumerate() {
        if changed.contains(v) {
            values[k] = Term::Var(Var::fresh(Sort::Int));
        }
    }
    let mut guards = walk.guards;
    if let Some(Command::WhileOpen {
        invariant: Some(inv), ..
    }) = ast.line(open).map(|l| &l.command)
    {
        let s = Substitution::from_pairs(vars.iter().cloned().zip(values.iter().cloned())).expect("integers");
        guards.push(inv.apply(&s));
    }
    let mut path = walk.path;
    path.push(format!("havoc@{open}"));
    Walk { path, guards, values }
}

/// A ranking expression: a single one or a lexicographic pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rank {
    Single(Term),
    Lex(Term, Term),
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Single(e) => write!(f, "{e}"),
            Rank::Lex(a, b) => write!(f, "({a}, {b})"),
        }
    }
}

impl Serialize for Rank {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Rank::Single(e) => s.collect_str(e),
            Rank::Lex(a, b) => s.collect_seq([a.to_string(), b.to_string()]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// `guard ⟹ e ≥ 0`
    Bounded,
    /// `guard ⟹ e > e·update`
    Decreasing,
    /// `guard ⟹ e ≥ e·update`
    NonIncreasing,
}

/// One validity query of a certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RankCheck {
    pub cycle: Vec<String>,
    pub kind: CheckKind,
    #[serde(serialize_with = "ser_display")]
    pub premise: Term,
    #[serde(serialize_with = "ser_display")]
    pub conclusion: Term,
    pub verdict: SolverVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RankCertificate {
    pub header: usize,
    pub symbol: String,
    pub rank: Rank,
    pub checks: Vec<RankCheck>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RankFailure {
    #[error("{check:?} fails on cycle {cycle:?}: {premise} does not imply {conclusion}, counterexample {counterexample}")]
    Invalid {
        cycle: Vec<String>,
        check: CheckKind,
        premise: String,
        conclusion: String,
        counterexample: Model,
    },
    #[error("undecided: {reason}")]
    Unknown { reason: String },
}

fn query(solver: &Solver, cycle: &Cycle, kind: CheckKind, conclusion: Term) -> RankCheck {
    let verdict = solver.check_implies(&cycle.guard, &conclusion);
    RankCheck {
        cycle: cycle.path.clone(),
        kind,
        premise: cycle.guard.clone(),
        conclusion,
        verdict,
    }
}

fn settle(checks: &[RankCheck]) -> Result<(), RankFailure> {
    if let Some(c) = checks.iter().find(|c| matches!(c.verdict, SolverVerdict::Invalid(_))) {
        let SolverVerdict::Invalid(m) = &c.verdict else { unreachable!() };
        return Err(RankFailure::Invalid {
            cycle: c.cycle.clone(),
            check: c.kind,
            premise: c.premise.to_string(),
            conclusion: c.conclusion.to_string(),
            counterexample: m.clone(),
        });
    }
    if let Some(c) = checks.iter().find(|c| matches!(c.verdict, SolverVerdict::Unknown(_))) {
        let SolverVerdict::Unknown(r) = &c.verdict else { unreachable!() };
        return Err(RankFailure::Unknown { reason: r.clone() });
    }
    Ok(())
}

/// Checks `rank` on every cycle of `ls`.
pub fn verify_rank(solver: &Solver, ls: &LoopSummary, rank: &Rank) -> Result<RankCertificate, RankFailure> {
    let mut checks = Vec::new();
    for cycle in &ls.cycles {
        let s = cycle.substitution(&ls.vars);
        match rank {
            Rank::Single(e) => {
                checks.push(query(solver, cycle, CheckKind::Bounded, build::ge(e.clone(), build::int(0))));
                checks.push(query(solver, cycle, CheckKind::Decreasing, build::gt(e.clone(), e.apply(&s))));
            }
            Rank::Lex(first, second) => {
                let strict = [
                    query(solver, cycle, CheckKind::Bounded, build::ge(first.clone(), build::int(0))),
                    query(solver, cycle, CheckKind::Decreasing, build::gt(first.clone(), first.apply(&s))),
                ];
                if settle(&strict).is_ok() {
                    checks.extend(strict);
                    continue;
                }
                checks.push(query(
                    solver,
                    cycle,
                    CheckKind::NonIncreasing,
                    build::ge(first.clone(), first.apply(&s)),
                ));
                checks.push(query(solver, cycle, CheckKind::Bounded, build::ge(second.clone(), build::int(0))));
                checks.push(query(
                    solver,
                    cycle,
                    CheckKind::Decreasing,
                    build::gt(second.clone(), second.apply(&s)),
                ));
            }
        }
        settle(&checks)?;
    }
    Ok(RankCertificate {
        header: ls.header,
        symbol: ls.symbol.clone(),
        rank: rank.clone(),
        checks,
    })
}

/// Options for [`search_rank`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    /// Coefficients range over `-bound..=bound`.
    pub bound: i64,
    /// Try lexicographic pairs when no single expression works.
    pub lexicographic: bool,
    pub seed: u64,
    /// Sample points per cycle for the cheap pre-filter.
    pub samples: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            bound: 2,
            lexicographic: true,
            seed: 0,
            samples: 48,
        }
    }
}

/// `c0 + Σ ck·xk` written the way a person would.
pub fn linear_term(vars: &[Var], coeffs: &[i64], constant: i64) -> Term {
    let scaled = |c: i64, v: &Var| {
        let x = Term::Var(v.clone());
        if c.abs() == 1 {
            x
        } else {
            build::mul(build::int(c.abs()), x)
        }
    };
    let mut acc: Option<Term> = None;
    let mut negatives = Vec::new();
    for (v, &c) in vars.iter().zip(coeffs) {
        if c > 0 {
            let t = scaled(c, v);
            acc = Some(match acc {
                Some(a) => build::add(a, t),
                None => t,
            });
        } else if c < 0 {
            negatives.push(scaled(c, v));
        }
    }
    let mut e = acc.unwrap_or_else(|| build::int(0));
    for t in negatives {
        e = build::sub(e, t);
    }
    match constant.cmp(&0) {
        std::cmp::Ordering::Greater => build::add(e, build::int(constant)),
        std::cmp::Ordering::Less => build::sub(e, build::int(-constant)),
        std::cmp::Ordering::Equal => e,
    }
}

/// Candidate coefficient vectors, simplest first.
fn candidates(n: usize, bound: i64) -> Vec<(Vec<i64>, i64)> {
    let values: Vec<i64> = {
        let mut v: Vec<i64> = (-bound..=bound).filter(|c| *c != 0).collect();
        v.sort_by_key(|c| (c.abs(), *c < 0));
        v
    };
    let mut vecs: Vec<Vec<i64>> = vec![Vec::new()];
    for _ in 0..n {
        vecs = vecs
            .into_iter()
            .flat_map(|prefix| {
                std::iter::once(0).chain(values.iter().copied()).map(move |c| {
                    let mut p = prefix.clone();
                    p.push(c);
                    p
                })
            })
            .collect();
    }
    vecs.retain(|v| v.iter().any(|c| *c != 0));
    let order = |c: i64| if c == 0 { 0 } else { values.iter().position(|x| *x == c).unwrap() + 1 };
    let mut out: Vec<(Vec<i64>, i64)> = vecs
        .into_iter()
        .flat_map(|v| std::iter::once(0).chain(values.iter().copied()).map(move |c0| (v.clone(), c0)))
        .collect();
    out.sort_by_key(|(v, c0)| {
        (
            v.iter().filter(|c| **c != 0).count(),
            v.iter().map(|c| c.abs()).sum::<i64>(),
            c0.abs(),
            v.iter().map(|c| order(*c)).collect::<Vec<_>>(),
            order(*c0),
        )
    });
    out
}

/// Points satisfying a cycle's guard, with the values after the cycle.
struct Samples(Vec<(BTreeMap<Var, Value>, BTreeMap<Var, Value>)>);

fn sample(ls: &LoopSummary, cycle: &Cycle, rng: &mut ChaCha8Rng, want: usize) -> Samples {
    let mut free: BTreeSet<Var> = cycle.guard.vars();
    for u in &cycle.update {
        u.collect_vars(&mut free);
    }
    free.extend(ls.vars.iter().cloned());
    let mut out = Vec::new();
    for _ in 0..want * 60 {
        if out.len() >= want {
            break;
        }
        let env: BTreeMap<Var, Value> = free
            .iter()
            .map(|v| (v.clone(), Value::Int(BigInt::from(rng.gen_range(-8i64..=8)))))
            .collect();
        if eval_in(&cycle.guard, &env) != Ok(Value::Bool(true)) {
            continue;
        }
        let mut post = env.clone();
        let mut ok = true;
        for (v, u) in ls.vars.iter().zip(&cycle.update) {
            match eval_in(u, &env) {
                Ok(val) => {
                    post.insert(v.clone(), val);
                }
                Err(_) => ok = false,
            }
        }
        if ok {
            out.push((env, post));
        }
    }
    Samples(out)
}

fn value_of(e: &Term, env: &BTreeMap<Var, Value>) -> Option<BigInt> {
    eval_in(e, env).ok().and_then(|v| v.as_int().cloned())
}

impl Samples {
    fn strict(&self, e: &Term) -> bool {
        self.0.iter().all(|(pre, post)| match (value_of(e, pre), value_of(e, post)) {
            (Some(a), Some(b)) => a >= BigInt::from(0) && a > b,
            _ => false,
        })
    }

    fn weak(&self, e: &Term) -> bool {
        self.0.iter().all(|(pre, post)| match (value_of(e, pre), value_of(e, post)) {
            (Some(a), Some(b)) => a >= b,
            _ => false,
        })
    }
}

/// First linear template that [`verify_rank`] accepts, simplest first.
pub fn search_rank(solver: &Solver, ls: &LoopSummary, config: &SearchConfig) -> Option<RankCertificate> {
    if ls.cycles.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ls.header as u64);
    let samples: Vec<Samples> = ls.cycles.iter().map(|c| sample(ls, c, &mut rng, config.samples)).collect();
    let terms: Vec<Term> = candidates(ls.vars.len(), config.bound)
        .into_iter()
        .map(|(v, c0)| linear_term(&ls.vars, &v, c0))
        .collect();
    for e in &terms {
        if samples.iter().all(|s| s.strict(e)) {
            if let Ok(cert) = verify_rank(solver, ls, &Rank::Single(e.clone())) {
                return Some(cert);
            }
        }
    }
    if !config.lexicographic || ls.cycles.len() < 2 {
        return None;
    }
    // Components without a constant: the constant never matters for the
    // first component and only shifts the bound of the second.
    let simple: Vec<&Term> = terms
        .iter()
        .zip(candidates(ls.vars.len(), config.bound))
        .filter(|(_, (v, c0))| *c0 == 0 && v.iter().filter(|c| **c != 0).count() <= 2)
        .map(|(t, _)| t)
        .collect();
    for first in &simple {
        if !samples.iter().all(|s| s.weak(first)) {
            continue;
        }
        let strict_on: Vec<bool> = samples.iter().map(|s| s.strict(first)).collect();
        if strict_on.iter().all(|b| *b) {
            continue;
        }
        for second in &terms {
            let fits = samples.iter().zip(&strict_on).all(|(s, st)| *st || s.strict(second));
            if fits {
                if let Ok(cert) = verify_rank(solver, ls, &Rank::Lex((*first).clone(), second.clone())) {
                    return Some(cert);
                }
            }
        }
    }
    None
}

/// Where the ranking expression of a loop came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankSource {
    Override,
    Annotation,
    Search,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum LoopOutcome {
    Certified {
        source: RankSource,
        certificate: RankCertificate,
    },
    Uncertified {
        /// Why a given expression was rejected, if one was given.
        rejected: Option<RankFailure>,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoopReport {
    pub header: usize,
    pub summary: LoopSummary,
    pub outcome: LoopOutcome,
    /// A user-provided expression that failed before search took over.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<RankFailure>,
}

/// Termination evidence for `R_P`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProgramTermination {
    pub loops: Vec<LoopReport>,
}

impl ProgramTermination {
    /// Every loop has a certificate.
    pub fn is_certified(&self) -> bool {
        self.loops
            .iter()
            .all(|l| matches!(l.outcome, LoopOutcome::Certified { .. }))
    }

    pub fn certificates(&self) -> Vec<&RankCertificate> {
        self.loops
            .iter()
            .filter_map(|l| match &l.outcome {
                LoopOutcome::Certified { certificate, .. } => Some(certificate),
                _ => None,
            })
            .collect()
    }
}

/// Certifies every loop: an override for the header line is tried first,
/// then a `@rank` annotation, then template search.
pub fn certify_program(
    solver: &Solver,
    r: &Lctrs,
    cmap: &ConversionMap,
    ast: &WhileAst,
    overrides: &BTreeMap<usize, Rank>,
    config: &SearchConfig,
) -> Result<ProgramTermination, TerminationError> {
    let summaries = summarize_loops(r, cmap, ast)?;
    let mut loops = Vec::new();
    for summary in summaries {
        let annotated = match ast.line(summary.header).map(|l| &l.command) {
            Some(Command::WhileOpen { rank: Some(e), .. }) => Some(Rank::Single(e.clone())),
            _ => None,
        };
        let given = overrides
            .get(&summary.header)
            .cloned()
            .map(|r| (RankSource::Override, r))
            .or(annotated.map(|r| (RankSource::Annotation, r)));
        let mut rejected = None;
        let mut outcome = None;
        if let Some((source, rank)) = given {
            match verify_rank(solver, &summary, &rank) {
                Ok(certificate) => outcome = Some(LoopOutcome::Certified { source, certificate }),
                Err(e) => rejected = Some(e),
            }
        }
        let outcome = match outcome {
            Some(o) => o,
            None => match search_rank(solver, &summary, config) {
                Some(certificate) => LoopOutcome::Certified {
                    source: RankSource::Search,
                    certificate,
                },
                None => LoopOutcome::Uncertified {
                    rejected: rejected.clone(),
                    reason: format!(
                        "no linear ranking expression with coefficients in [-{b}, {b}] was found",
                        b = config.bound
                    ),
                },
            },
        };
        loops.push(LoopReport {
            header: summary.header,
            summary,
            outcome,
            rejected,
        });
    }
    Ok(ProgramTermination { loops })
}

/// Verdict on `R_P ∪ R_check ∪ H`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum LiftVerdict {
    Terminating { justification: Vec<String> },
    Unknown { reason: String },
}

impl LiftVerdict {
    pub fn is_terminating(&self) -> bool {
        matches!(self, LiftVerdict::Terminating { .. })
    }
}

/// Extends termination of `R_P` to the union with the check rules and the
/// oriented hypotheses: those are rooted at `chk`, which never occurs in
/// `R_P`, and rewrite to a truth value, so each can fire at most once on
/// any `chk` redex.
pub fn lift_termination(
    program: Option<&ProgramTermination>,
    check: &[ConstrainedRule],
    hypotheses: &[ConstrainedRule],
) -> LiftVerdict {
    let Some(program) = program.filter(|p| p.is_certified()) else {
        return LiftVerdict::Unknown {
            reason: "termination of the program rules is not certified".into(),
        };
    };
    for r in check.iter().chain(hypotheses) {
        if r.lhs().root_fun().map(|f| f.name()) != Some(CHK) {
            return LiftVerdict::Unknown {
                reason: format!("rule {} is not rooted at {CHK}", r.id()),
            };
        }
        if !r.rhs().is_value() {
            return LiftVerdict::Unknown {
                reason: format!("the right-hand side of rule {} is not a value", r.id()),
            };
        }
    }
    let mut justification: Vec<String> = if program.loops.is_empty() {
        vec!["the program rules have no loop, so every rule moves to a later program point".into()]
    } else {
        program
            .certificates()
            .iter()
            .map(|c| {
                format!(
                    "loop at line {} ({}) is ranked by {}",
                    c.header, c.symbol, c.rank
                )
            })
            .collect()
    };
    justification.push(format!(
        "{} check and hypothesis rules are rooted at {CHK} and rewrite to a value",
        check.len() + hypotheses.len()
    ));
    LiftVerdict::Terminating { justification }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convert::{convert, make_check_rules};
    use crate::lctrs::Origin;
    use crate::solver::SolverConfig;
    use crate::syntax::{parse_constraint, parse_int_expr};
    use crate::whilelang::parse_program;

    const P_SUM: &str = "i := 0;\nz := 0;\nwhile (x > i) {\n z := z + i + 1;\n i := i + 1;\n}\n";
    const P_NEQ: &str = "i := 0;\nz := 0;\nwhile (x != i) {\n z := z + i + 1;\n i := i + 1;\n}\n";

    fn c(s: &str) -> Term {
        parse_constraint(s).unwrap()
    }

    fn solver() -> Solver {
        Solver::new(SolverConfig::resolve(None, None))
    }

    fn summary_of(src: &str) -> (Vec<LoopSummary>, Lctrs, ConversionMap, WhileAst) {
        let ast = parse_program(src).unwrap();
        let (r, cmap) = convert(&ast).unwrap();
        (summarize_loops(&r, &cmap, &ast).unwrap(), r, cmap, ast)
    }

    #[test]
    fn sum_loop_summary() {
        let (ls, ..) = summary_of(P_SUM);
        assert_eq!(ls.len(), 1);
        assert_eq!(ls[0].symbol, "state3");
        assert_eq!(ls[0].cycles.len(), 1);
        let cyc = &ls[0].cycles[0];
        assert_eq!(cyc.path, vec!["l3+", "l4", "l5", "l6"]);
        assert_eq!(cyc.guard.to_string(), "x > i");
        let shown: Vec<String> = cyc.update.iter().map(|t| t.to_string()).collect();
        assert_eq!(shown, vec!["x", "i + 1", "z + i + 1"]);
    }

    #[test]
    fn loop_free_program_has_no_summaries() {
        let (ls, ..) = summary_of("x := 1;\nskip;\n");
        assert!(ls.is_empty());
    }

    #[test]
    fn verify_and_search_on_sum() {
        let s = solver();
        let (ls, ..) = summary_of(P_SUM);
        let cert = verify_rank(&s, &ls[0], &Rank::Single(parse_int_expr("x - i").unwrap())).unwrap();
        assert!(cert.checks.iter().all(|c| c.verdict.is_valid()));
        assert!(matches!(
            verify_rank(&s, &ls[0], &Rank::Single(parse_int_expr("i").unwrap())),
            Err(RankFailure::Invalid { .. })
        ));
        let found = search_rank(&s, &ls[0], &SearchConfig::default()).unwrap();
        assert_eq!(found.rank.to_string(), "x - i");
        assert!(verify_rank(&s, &ls[0], &found.rank).is_ok());
    }

    #[test]
    fn not_equal_guard_is_not_certified() {
        let s = solver();
        let (ls, ..) = summary_of(P_NEQ);
        assert!(verify_rank(&s, &ls[0], &Rank::Single(parse_int_expr("x - i").unwrap())).is_err());
        assert!(search_rank(&s, &ls[0], &SearchConfig::default()).is_none());
    }

    #[test]
    fn identity_loop_has_no_rank() {
        let s = solver();
        let (ls, ..) = summary_of("while (true) {\n skip;\n}\n");
        assert!(search_rank(&s, &ls[0], &SearchConfig::default()).is_none());
    }

    #[test]
    fn annotation_is_tried_first() {
        let s = solver();
        let src = "i := 0;\nwhile @rank x - i + 5 (x > i) {\n i := i + 1;\n}\n";
        let ast = parse_program(src).unwrap();
        let (r, cmap) = convert(&ast).unwrap();
        let t = certify_program(&s, &r, &cmap, &ast, &BTreeMap::new(), &SearchConfig::default()).unwrap();
        let LoopOutcome::Certified { source, certificate } = &t.loops[0].outcome else { panic!() };
        assert_eq!(*source, RankSource::Annotation);
        assert_eq!(certificate.rank.to_string(), "x - i + 5");
    }

    #[test]
    fn nested_loops_are_certified_separately() {
        let s = solver();
        let src = "i := 0;\nwhile (x > i) {\n j := 0;\n while (y > j) {\n  j := j + 1;\n }\n i := i + 1;\n}\n";
        let ast = parse_program(src).unwrap();
        let (r, cmap) = convert(&ast).unwrap();
        let t = certify_program(&s, &r, &cmap, &ast, &BTreeMap::new(), &SearchConfig::default()).unwrap();
        assert_eq!(t.loops.len(), 2);
        assert!(t.loops[0].summary.cycles[0].path.iter().any(|p| p.starts_with("havoc@")));
        assert!(t.is_certified(), "{:#?}", t.loops);
    }

    #[test]
    fn two_cycles_need_a_lexicographic_rank() {
        let s = solver();
        // Either x decreases and y is reset, or y decreases.
        let src = "while (x > 0 && y >= 0) {\n if (y > 0) {\n  y := y - 1;\n } else {\n  x := x - 1;\n  y := 2;\n }\n}\n";
        let (ls, ..) = summary_of(src);
        assert_eq!(ls[0].cycles.len(), 2);
        let cert = search_rank(&s, &ls[0], &SearchConfig::default()).unwrap();
        assert!(matches!(cert.rank, Rank::Lex(..)), "{}", cert.rank);
    }

    #[test]
    fn lifting_requires_a_certificate_and_value_rules() {
        let s = solver();
        let (_, r, cmap, ast) = summary_of(P_SUM);
        let chk = make_check_rules(&c("2 * z = x * (x + 1)"), &cmap).unwrap();
        let t = certify_program(&s, &r, &cmap, &ast, &BTreeMap::new(), &SearchConfig::default()).unwrap();
        let hyp = ConstrainedRule::new(
            "hyp:A6",
            cmap.check(cmap.state_at(3).unwrap()),
            Term::tt(),
            c("2 * z = i * (i + 1) && x >= i"),
            Origin::Hypothesis { label: "A6".into() },
        )
        .unwrap();
        let check: Vec<ConstrainedRule> = chk.rules().to_vec();
        assert!(lift_termination(Some(&t), &check, std::slice::from_ref(&hyp)).is_terminating());
        assert!(!lift_termination(None, &check, std::slice::from_ref(&hyp)).is_terminating());
        let bad = ConstrainedRule::new(
            "hyp:B",
            cmap.check(cmap.state_at(3).unwrap()),
            cmap.check(cmap.state_at(4).unwrap()),
            Term::tt(),
            Origin::Hypothesis { label: "B".into() },
        )
        .unwrap();
        assert!(!lift_termination(Some(&t), &check, &[bad]).is_terminating());
    }

    #[test]
    fn linear_terms_print_naturally() {
        let v = [Var::int("x"), Var::int("i"), Var::int("z")];
        assert_eq!(linear_term(&v, &[1, -1, 0], 0).to_string(), "x - i");
        assert_eq!(linear_term(&v, &[0, -2, 0], 1).to_string(), "0 - 2 * i + 1");
        assert_eq!(linear_term(&v, &[2, 0, 1], -1).to_string(), "2 * x + z - 1");
    }
}
