//! Constrained rewrite rules, rule sets and the rewrite relation on terms.

pub mod checks;
pub mod constrained;
pub mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::terms::{match_term, FunSym, Position, Sort, SymbolKind, Term, Var};
use crate::theory::{eval_ground, holds_under, Op};

pub use checks::{basic_positions, check_orthogonal, check_quasi_reductive, overlaps, CheckReport, Overlap};
pub use constrained::{base_step, normalize_ct, rewrite_constrained, ConstrainedTerm, NormStep, NormalizeOutcome, RewriteError};
pub use text::{parse_lctrs, parse_term, print_lctrs, print_rules, TextError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule {id}: sides have different sorts ({lhs} vs {rhs})")]
    SortMismatch { id: String, lhs: Sort, rhs: Sort },
    #[error("rule {id}: left-hand side {lhs} is a logical term")]
    LogicalLhs { id: String, lhs: String },
    #[error("rule {id}: left-hand side {lhs} is not a function application")]
    VariableLhs { id: String, lhs: String },
    #[error("rule {id}: constraint {guard} is not a boolean logical term")]
    BadGuard { id: String, guard: String },
    #[error("duplicate rule id {0}")]
    DuplicateId(String),
}

/// Where a rule came from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Origin {
    ProgramLine { line: usize },
    Check,
    Hypothesis { label: String },
    Calc,
    /// Read from a rule file.
    Input,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::ProgramLine { line } => write!(f, "line {line}"),
            Origin::Check => f.write_str("check"),
            Origin::Hypothesis { label } => write!(f, "hypothesis {label}"),
            Origin::Calc => f.write_str("calc"),
            Origin::Input => f.write_str("input"),
        }
    }
}

/// `ℓ → r [φ]`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstrainedRule {
    id: String,
    lhs: Term,
    rhs: Term,
    guard: Term,
    origin: Origin,
    lvars: BTreeSet<Var>,
}

impl ConstrainedRule {
    pub fn new(
        id: impl Into<String>,
        lhs: Term,
        rhs: Term,
        guard: Term,
        origin: Origin,
    ) -> Result<ConstrainedRule, RuleError> {
        let id = id.into();
        if lhs.sort() != rhs.sort() {
            return Err(RuleError::SortMismatch {
                id,
                lhs: lhs.sort(),
                rhs: rhs.sort(),
            });
        }
        if guard.sort() != Sort::Bool || !guard.is_logical() {
            return Err(RuleError::BadGuard {
                id,
                guard: guard.to_string(),
            });
        }
        if origin != Origin::Calc {
            if lhs.as_var().is_some() || lhs.is_value() {
                return Err(RuleError::VariableLhs {
                    id,
                    lhs: lhs.to_string(),
                });
            }
            if lhs.is_logical() {
                return Err(RuleError::LogicalLhs {
                    id,
                    lhs: lhs.to_string(),
                });
            }
        }
        Ok(Self::build(id, lhs, rhs, guard, origin))
    }

    pub(crate) fn calc(id: String, lhs: Term, rhs: Term, guard: Term) -> ConstrainedRule {
        Self::build(id, lhs, rhs, guard, Origin::Calc)
    }

    fn build(id: String, lhs: Term, rhs: Term, guard: Term, origin: Origin) -> ConstrainedRule {
        let lhs_vars = lhs.vars();
        let mut lvars = guard.vars();
        lvars.extend(rhs.vars().into_iter().filter(|v| !lhs_vars.contains(v)));
        ConstrainedRule {
            id,
            lhs,
            rhs,
            guard,
            origin,
            lvars,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn lhs(&self) -> &Term {
        &self.lhs
    }

    pub fn rhs(&self) -> &Term {
        &self.rhs
    }

    pub fn guard(&self) -> &Term {
        &self.guard
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    /// `Var(φ) ∪ (Var(r) ∖ Var(ℓ))`
    pub fn lvars(&self) -> &BTreeSet<Var> {
        &self.lvars
    }

    pub fn root_symbol(&self) -> Option<&Arc<FunSym>> {
        self.lhs.root_fun()
    }

    pub fn with_id(&self, id: impl Into<String>) -> ConstrainedRule {
        let mut r = self.clone();
        r.id = id.into();
        r
    }

    /// Applies a renaming or substitution to every part.
    pub fn instantiate(&self, s: &crate::terms::Substitution) -> ConstrainedRule {
        Self::build(
            self.id.clone(),
            self.lhs.apply(s),
            self.rhs.apply(s),
            self.guard.apply(s),
            self.origin.clone(),
        )
    }

    /// A variant whose variables are all fresh.
    pub fn renamed(&self) -> ConstrainedRule {
        let ren = crate::terms::renaming_apart([&self.lhs, &self.rhs, &self.guard]);
        self.instantiate(&ren)
    }
}

impl fmt::Display for ConstrainedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.rhs)?;
        if self.guard != Term::tt() {
            write!(f, " [{}]", self.guard)?;
        }
        Ok(())
    }
}

/// A rule set over a declared signature.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lctrs {
    sorts: Vec<Sort>,
    funs: BTreeMap<String, Arc<FunSym>>,
    rules: Vec<ConstrainedRule>,
}

impl Lctrs {
    pub fn new() -> Lctrs {
        Lctrs::default()
    }

    pub fn declare_sort(&mut self, sort: Sort) {
        if !sort.is_theory() && !self.sorts.contains(&sort) {
            self.sorts.push(sort);
        }
    }

    pub fn declare_fun(&mut self, f: Arc<FunSym>) {
        for s in f.arg_sorts().iter().chain([f.result_sort()]) {
            self.declare_sort(s.clone());
        }
        self.funs.insert(f.name().to_string(), f);
    }

    pub fn add_rule(&mut self, rule: ConstrainedRule) -> Result<(), RuleError> {
        if self.rules.iter().any(|r| r.id == rule.id) {
            return Err(RuleError::DuplicateId(rule.id));
        }
        for t in [&rule.lhs, &rule.rhs] {
            collect_funs(t, &mut |f| {
                if !self.funs.contains_key(f.name()) {
                    self.declare_fun(f.clone());
                }
            });
        }
        self.rules.push(rule);
        Ok(())
    }

    /// Rules of both systems; ids must not clash.
    pub fn union(&self, other: &Lctrs) -> Result<Lctrs, RuleError> {
        let mut out = self.clone();
        for f in other.funs.values() {
            out.declare_fun(f.clone());
        }
        for r in &other.rules {
            out.add_rule(r.clone())?;
        }
        Ok(out)
    }

    pub fn sorts(&self) -> &[Sort] {
        &self.sorts
    }

    pub fn funs(&self) -> &BTreeMap<String, Arc<FunSym>> {
        &self.funs
    }

    pub fn fun(&self, name: &str) -> Option<&Arc<FunSym>> {
        self.funs.get(name)
    }

    pub fn rules(&self) -> &[ConstrainedRule] {
        &self.rules
    }

    pub fn rule(&self, id: &str) -> Option<&ConstrainedRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn rules_for<'a>(&'a self, f: &'a FunSym) -> impl Iterator<Item = &'a ConstrainedRule> + 'a {
        self.rules
            .iter()
            .filter(move |r| r.root_symbol().map(|g| g.as_ref()) == Some(f))
    }

    pub fn defined_symbols(&self) -> BTreeSet<Arc<FunSym>> {
        self.rules
            .iter()
            .filter_map(|r| r.root_symbol().cloned())
            .collect()
    }

    pub fn is_defined(&self, f: &FunSym) -> bool {
        self.rules
            .iter()
            .any(|r| r.root_symbol().map(|g| g.as_ref()) == Some(f))
    }

    pub fn symbol_kind(&self, t: &Term) -> Option<SymbolKind> {
        match t {
            Term::Int(_) | Term::Bool(_) => Some(SymbolKind::TheoryValue),
            Term::Op(..) => Some(SymbolKind::TheoryCalc),
            Term::App(f, _) if self.is_defined(f) => Some(SymbolKind::TermDefined),
            Term::App(..) => Some(SymbolKind::TermConstructor),
            Term::Var(_) => None,
        }
    }

    /// Built only from constructors, values and variables.
    pub fn is_constructor_term(&self, t: &Term) -> bool {
        match t {
            Term::Var(_) | Term::Int(_) | Term::Bool(_) => true,
            Term::Op(..) => false,
            Term::App(f, args) => !self.is_defined(f) && args.iter().all(|a| self.is_constructor_term(a)),
        }
    }
}

fn collect_funs(t: &Term, sink: &mut dyn FnMut(&Arc<FunSym>)) {
    if let Term::App(f, _) = t {
        sink(f);
    }
    for a in t.args() {
        collect_funs(a, sink);
    }
}

/// One rewrite step: the result, the rule used and the position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub result: Term,
    pub rule: String,
    pub position: Position,
}

/// Root steps available at `s` (calculations included).
fn root_steps(r: &Lctrs, s: &Term) -> Vec<(Term, String)> {
    let mut out = Vec::new();
    match s {
        Term::Op(op, args) if args.iter().all(Term::is_value) => {
            if let Ok(v) = eval_ground(s) {
                out.push((Term::from_value(&v), format!("calc:{}", op.symbol())));
            }
        }
        Term::App(f, _) => {
            for rule in r.rules_for(f) {
                let Some(gamma) = match_term(rule.lhs(), s) else {
                    continue;
                };
                // Rules whose logical variables are not fixed by matching would
                // need a value search; generated systems never have them.
                if !rule.lvars().iter().all(|v| gamma.get(v).is_some_and(Term::is_value)) {
                    continue;
                }
                if holds_under(rule.guard(), &gamma).unwrap_or(false) {
                    out.push((rule.rhs().apply(&gamma), rule.id().to_string()));
                }
            }
        }
        _ => {}
    }
    out
}

/// All one-step successors of `t`, positions in pre-order.
pub fn rewrite_step(r: &Lctrs, t: &Term) -> Vec<Step> {
    let mut out = Vec::new();
    for p in t.positions() {
        let s = t.subterm_at(&p).expect("own position");
        for (res, rule) in root_steps(r, s) {
            out.push(Step {
                result: t.replace_at(&p, res).expect("sort preserved"),
                rule,
                position: p.clone(),
            });
        }
    }
    out
}

/// The leftmost-innermost step, if any.
pub fn innermost_step(r: &Lctrs, t: &Term) -> Option<Step> {
    fn post_order(t: &Term, path: &mut Vec<usize>, out: &mut Vec<Position>) {
        for (i, a) in t.args().iter().enumerate() {
            path.push(i + 1);
            post_order(a, path, out);
            path.pop();
        }
        out.push(Position(path.clone()));
    }
    let mut order = Vec::new();
    post_order(t, &mut Vec::new(), &mut order);
    for p in order {
        let s = t.subterm_at(&p).expect("own position");
        if let Some((res, rule)) = root_steps(r, s).into_iter().next() {
            return Some(Step {
                result: t.replace_at(&p, res).expect("sort preserved"),
                rule,
                position: p,
            });
        }
    }
    None
}

/// Rewrites leftmost-innermost until a normal form or `fuel` steps.
pub fn normalize_innermost(r: &Lctrs, t: &Term, fuel: usize) -> (Term, Vec<Step>) {
    let mut cur = t.clone();
    let mut steps = Vec::new();
    while steps.len() < fuel {
        match innermost_step(r, &cur) {
            Some(st) => {
                cur = st.result.clone();
                steps.push(st);
            }
            None => break,
        }
    }
    (cur, steps)
}

/// The calculation rule for an operator symbol named in a rule id `calc:<op>`.
pub fn calc_rule(id: &str) -> Option<ConstrainedRule> {
    let sym = id.strip_prefix("calc:")?;
    Op::from_symbol(sym).map(crate::theory::calc_rule_for)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::build::*;

    pub(crate) fn fact_system() -> Lctrs {
        let fact = FunSym::new("fact", vec![Sort::Int], Sort::Int);
        let x = var("x");
        let mut r = Lctrs::new();
        r.add_rule(
            ConstrainedRule::new(
                "f1",
                Term::app(&fact, vec![x.clone()]).unwrap(),
                int(1),
                ge(int(0), x.clone()),
                Origin::ProgramLine { line: 0 },
            )
            .unwrap(),
        )
        .unwrap();
        r.add_rule(
            ConstrainedRule::new(
                "f2",
                Term::app(&fact, vec![x.clone()]).unwrap(),
                mul(x.clone(), Term::app(&fact, vec![sub(x.clone(), int(1))]).unwrap()),
                not(ge(int(0), x)),
                Origin::ProgramLine { line: 0 },
            )
            .unwrap(),
        )
        .unwrap();
        r
    }

    #[test]
    fn factorial_of_three_in_ten_steps() {
        let r = fact_system();
        let fact = r.fun("fact").unwrap().clone();
        let t = Term::app(&fact, vec![int(3)]).unwrap();
        let (nf, steps) = normalize_innermost(&r, &t, 100);
        assert_eq!(nf, int(6));
        assert_eq!(steps.len(), 10);
    }

    #[test]
    fn calculations() {
        let r = Lctrs::new();
        let (nf, steps) = normalize_innermost(&r, &sub(int(3), int(1)), 10);
        assert_eq!((nf, steps.len()), (int(2), 1));
        let m = mul(int(3), mul(int(2), mul(int(1), int(1))));
        let (nf, steps) = normalize_innermost(&r, &m, 10);
        assert_eq!((nf, steps.len()), (int(6), 3));
        assert!(steps.iter().all(|s| s.rule == "calc:*"));
    }

    #[test]
    fn rule_validation() {
        let err = ConstrainedRule::new("r", add(var("x"), int(1)), int(0), Term::tt(), Origin::Check);
        assert!(matches!(err, Err(RuleError::LogicalLhs { .. })));
        let f = FunSym::new("f", vec![Sort::Int], Sort::Int);
        let fx = Term::app(&f, vec![var("x")]).unwrap();
        let err = ConstrainedRule::new("r", fx.clone(), Term::tt(), Term::tt(), Origin::Check);
        assert!(matches!(err, Err(RuleError::SortMismatch { .. })));
        let ok = ConstrainedRule::new("r", fx, var("y"), gt(var("y"), int(0)), Origin::Check).unwrap();
        assert_eq!(ok.lvars().len(), 1);
    }

    #[test]
    fn calc_rule_lookup() {
        assert_eq!(calc_rule("calc:-").unwrap().to_string(), "x - y -> z [z = x - y]");
        assert!(calc_rule("l3").is_none());
    }
}
