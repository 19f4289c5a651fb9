//! Structural checks on rule sets: orthogonality, quasi-reductivity and
//! basic positions.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{ConstrainedRule, Lctrs};
use crate::solver::{SatVerdict, Solver, SolverVerdict};
use crate::terms::{unify, FunSym, Position, Substitution, Term, Var};
use crate::theory::build;

/// Outcome of a check with human-readable findings.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub ok: bool,
    /// Some solver query was undecided; `ok` is then false.
    pub undecided: bool,
    pub diagnostics: Vec<String>,
}

impl CheckReport {
    fn passed() -> CheckReport {
        CheckReport {
            ok: true,
            ..CheckReport::default()
        }
    }

    fn fail(&mut self, msg: String) {
        self.ok = false;
        self.diagnostics.push(msg);
    }

    fn undecided(&mut self, msg: String) {
        self.ok = false;
        self.undecided = true;
        self.diagnostics.push(msg);
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.ok { "ok" } else if self.undecided { "unknown" } else { "failed" })?;
        for d in &self.diagnostics {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

/// A pair of redexes that can occur at overlapping positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Overlap {
    pub outer: String,
    pub inner: String,
    pub position: Position,
    pub unifier: Substitution,
}

/// A logical variable may only be instantiated by a logical term.
fn respects_lvars(mgu: &Substitution, rules: [&ConstrainedRule; 2]) -> bool {
    rules
        .iter()
        .flat_map(|r| r.lvars().iter())
        .all(|v| mgu.get(v).is_none_or(Term::is_logical))
}

/// All overlaps between rules of `r`, with the guard conjunction of each
/// checked for satisfiability. Undecided conjunctions are kept and
/// reported through `undecided`.
pub fn overlaps(r: &Lctrs, solver: &Solver, undecided: &mut Vec<String>) -> Vec<Overlap> {
    let mut out = Vec::new();
    let rules = r.rules();
    for (a_idx, outer) in rules.iter().enumerate() {
        let outer_r = outer.renamed();
        for (b_idx, inner) in rules.iter().enumerate() {
            let inner_r = inner.renamed();
            for p in outer_r.lhs().positions() {
                let sub = outer_r.lhs().subterm_at(&p).expect("own position");
                if sub.as_var().is_some() || (p.is_root() && a_idx == b_idx) {
                    continue;
                }
                // Values and theory operators belong to the calc system.
                if !matches!(sub, Term::App(..)) {
                    continue;
                }
                let Some(mgu) = unify(sub, inner_r.lhs()) else { continue };
                if !respects_lvars(&mgu, [&outer_r, &inner_r]) {
                    continue;
                }
                let guard = build::and(outer_r.guard().apply(&mgu), inner_r.guard().apply(&mgu));
                match solver.check_sat(&guard) {
                    SatVerdict::Unsat => continue,
                    SatVerdict::Sat(_) => {}
                    SatVerdict::Unknown(why) => undecided.push(format!(
                        "overlap of {} with {} at {p}: guard satisfiability unknown ({why})",
                        inner.id(),
                        outer.id()
                    )),
                }
                out.push(Overlap {
                    outer: outer.id().to_string(),
                    inner: inner.id().to_string(),
                    position: p,
                    unifier: mgu,
                });
            }
        }
    }
    out
}

/// Left-linear and non-overlapping.
pub fn check_orthogonal(r: &Lctrs, solver: &Solver) -> CheckReport {
    let mut rep = CheckReport::passed();
    for rule in r.rules() {
        if !rule.lhs().is_linear() {
            rep.fail(format!("rule {} is not left-linear: {}", rule.id(), rule.lhs()));
        }
        // An operator below the root overlaps with a calculation rule.
        for p in rule.lhs().positions() {
            if let Ok(Term::Op(op, _)) = rule.lhs().subterm_at(&p) {
                if !p.is_root() {
                    rep.fail(format!(
                        "rule {} overlaps with calculation rule for {} at {p}",
                        rule.id(),
                        op.symbol()
                    ));
                }
            }
        }
    }
    let mut undecided = Vec::new();
    for o in overlaps(r, solver, &mut undecided) {
        rep.fail(format!(
            "rule {} overlaps rule {} at position {} (unifier {})",
            o.inner, o.outer, o.position, o.unifier
        ));
    }
    for u in undecided {
        rep.undecided(u);
    }
    rep
}

fn distinct_vars(args: &[Term]) -> Option<Vec<Var>> {
    let vs: Vec<Var> = args.iter().map(|a| a.as_var().cloned()).collect::<Option<_>>()?;
    let set: BTreeSet<&Var> = vs.iter().collect();
    (set.len() == vs.len()).then_some(vs)
}

/// Guard of `rule` after renaming the variables `vs` to `canon`.
fn guard_over(rule: &ConstrainedRule, vs: &[Var], canon: &[Var]) -> Term {
    let ren = Substitution::from_pairs(vs.iter().cloned().zip(canon.iter().map(|c| Term::Var(c.clone()))))
        .expect("same sorts");
    // Other guard variables are existential; keep them apart from the canon.
    let extra: Vec<Var> = rule
        .guard()
        .vars()
        .into_iter()
        .filter(|v| !vs.contains(v))
        .collect();
    let mut full = ren;
    for v in extra {
        full.insert(v.clone(), Term::Var(Var::fresh(v.sort().clone())))
            .expect("same sort");
    }
    rule.guard().apply(&full)
}

fn covers(solver: &Solver, guards: Vec<Term>, what: &str, rep: &mut CheckReport) {
    if guards.is_empty() {
        rep.fail(format!("{what}: no rule applies"));
        return;
    }
    let disj = guards
        .into_iter()
        .reduce(build::or)
        .expect("nonempty");
    match solver.check_valid(&disj) {
        SolverVerdict::Valid => {}
        SolverVerdict::Invalid(m) => rep.fail(format!("{what}: no rule applies when {m}")),
        SolverVerdict::Unknown(why) => rep.undecided(format!("{what}: coverage unknown ({why})")),
    }
}

/// Every defined symbol applied to constructor arguments is reducible.
/// Supported shapes: `f(x1,…,xn)` and unary `f(c(x1,…,xm))`.
pub fn check_quasi_reductive(r: &Lctrs, solver: &Solver) -> CheckReport {
    let mut rep = CheckReport::passed();
    for f in r.defined_symbols() {
        // Rules whose arguments contain defined symbols never fire on
        // constructor-argument terms and do not count.
        let rules: Vec<&ConstrainedRule> = r
            .rules_for(&f)
            .filter(|rule| rule.lhs().args().iter().all(|a| r.is_constructor_term(a)))
            .collect();
        let canon: Vec<Var> = f
            .arg_sorts()
            .iter()
            .enumerate()
            .map(|(k, s)| Var::new(&format!("_q{k}"), s.clone()))
            .collect();
        let flat: Option<Vec<Term>> = rules
            .iter()
            .map(|rule| distinct_vars(rule.lhs().args()).map(|vs| guard_over(rule, &vs, &canon)))
            .collect();
        if let Some(guards) = flat {
            covers(solver, guards, f.name(), &mut rep);
            continue;
        }
        if f.arity() == 1 {
            if let Some(msg) = check_by_constructor(r, solver, &f, &rules, &mut rep) {
                rep.fail(msg);
            }
            continue;
        }
        rep.fail(format!("{}: left-hand sides outside the supported shapes", f.name()));
    }
    rep
}

fn check_by_constructor(
    r: &Lctrs,
    solver: &Solver,
    f: &FunSym,
    rules: &[&ConstrainedRule],
    rep: &mut CheckReport,
) -> Option<String> {
    let arg_sort = &f.arg_sorts()[0];
    if arg_sort.is_theory() {
        return Some(format!("{}: value patterns are not supported", f.name()));
    }
    let mut split: Vec<(&ConstrainedRule, std::sync::Arc<FunSym>, Vec<Var>)> = Vec::new();
    for rule in rules {
        match &rule.lhs().args()[0] {
            Term::App(c, args) => split.push((rule, c.clone(), distinct_vars(args)?)),
            // A variable argument makes the rule cover every constructor.
            Term::Var(_) => return Some(format!("{}: mixed variable and constructor patterns", f.name())),
            _ => return Some(format!("{}: unsupported pattern", f.name())),
        }
    }
    let constructors = r
        .funs()
        .values()
        .filter(|c| c.result_sort() == arg_sort && !r.is_defined(c));
    for c in constructors {
        let canon: Vec<Var> = c
            .arg_sorts()
            .iter()
            .enumerate()
            .map(|(k, s)| Var::new(&format!("_q{k}"), s.clone()))
            .collect();
        let guards: Vec<Term> = split
            .iter()
            .filter(|(_, d, _)| d == c)
            .map(|(rule, _, vs)| guard_over(rule, vs, &canon))
            .collect();
        covers(solver, guards, &format!("{}({}(…))", f.name(), c.name()), rep);
    }
    None
}

/// Positions of `f(s1,…,sn)` with `f` defined and every `si` a constructor term.
pub fn basic_positions(r: &Lctrs, s: &Term) -> Vec<Position> {
    s.positions()
        .into_iter()
        .filter(|p| match s.subterm_at(p).expect("own position") {
            Term::App(f, args) => r.is_defined(f) && args.iter().all(|a| r.is_constructor_term(a)),
            _ => false,
        })
        .collect()
}
