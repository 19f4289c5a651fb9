//! Sorted first-order terms: sorts, symbols, variables, positions,
//! substitutions, matching and syntactic unification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_bigint::BigInt;
use thiserror::Error;

use crate::theory::{Op, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("position {pos} is not valid in {term}")]
    InvalidPosition { pos: Position, term: String },
    #[error("sort mismatch: expected {expected}, found {found}")]
    SortMismatch { expected: Sort, found: Sort },
    #[error("symbol {symbol} expects {expected} arguments, got {found}")]
    Arity {
        symbol: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Bool,
    Named(Arc<str>),
}

impl Sort {
    pub fn state() -> Sort {
        Sort::Named(Arc::from("state"))
    }

    pub fn named(name: &str) -> Sort {
        match name {
            "int" | "Int" => Sort::Int,
            "bool" | "Bool" => Sort::Bool,
            other => Sort::Named(Arc::from(other)),
        }
    }

    pub fn is_theory(&self) -> bool {
        matches!(self, Sort::Int | Sort::Bool)
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => f.write_str("int"),
            Sort::Bool => f.write_str("bool"),
            Sort::Named(n) => f.write_str(n),
        }
    }
}

/// Prefix reserved for generated variables; the surface parsers reject it.
pub const FRESH_PREFIX: &str = "_v";

static FRESH_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    name: Arc<str>,
    sort: Sort,
}

impl Var {
    pub fn new(name: &str, sort: Sort) -> Var {
        Var {
            name: Arc::from(name),
            sort,
        }
    }

    pub fn int(name: &str) -> Var {
        Var::new(name, Sort::Int)
    }

    /// A variable that cannot clash with any user-written name.
    pub fn fresh(sort: Sort) -> Var {
        let n = FRESH_COUNTER.fetch_add(1, Ordering::Relaxed);
        Var::new(&format!("{FRESH_PREFIX}{n}"), sort)
    }

    pub fn is_generated(&self) -> bool {
        self.name.starts_with(FRESH_PREFIX)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sort(&self) -> &Sort {
        &self.sort
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A term-signature symbol (theory symbols are represented by [`Op`] and values).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunSym {
    name: Arc<str>,
    args: Vec<Sort>,
    res: Sort,
}

impl FunSym {
    pub fn new(name: &str, args: Vec<Sort>, res: Sort) -> Arc<FunSym> {
        Arc::new(FunSym {
            name: Arc::from(name),
            args,
            res,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arg_sorts(&self) -> &[Sort] {
        &self.args
    }

    pub fn result_sort(&self) -> &Sort {
        &self.res
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

/// Classification of a root symbol relative to a rule set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolKind {
    TheoryValue,
    TheoryCalc,
    TermConstructor,
    TermDefined,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    Int(BigInt),
    Bool(bool),
    /// A theory (calculation) symbol applied to arguments.
    Op(Op, Vec<Term>),
    /// A term-signature symbol applied to arguments.
    App(Arc<FunSym>, Vec<Term>),
}

impl Term {
    pub fn var(name: &str, sort: Sort) -> Term {
        Term::Var(Var::new(name, sort))
    }

    pub fn int_var(name: &str) -> Term {
        Term::Var(Var::int(name))
    }

    pub fn int(n: impl Into<BigInt>) -> Term {
        Term::Int(n.into())
    }

    pub fn tt() -> Term {
        Term::Bool(true)
    }

    pub fn ff() -> Term {
        Term::Bool(false)
    }

    pub fn from_value(v: &Value) -> Term {
        match v {
            Value::Int(n) => Term::Int(n.clone()),
            Value::Bool(b) => Term::Bool(*b),
        }
    }

    pub fn op(op: Op, args: Vec<Term>) -> Term {
        debug_assert_eq!(op.arity(), args.len(), "arity of {op:?}");
        Term::Op(op, args)
    }

    /// Applies a term symbol, checking arity and argument sorts.
    pub fn app(sym: &Arc<FunSym>, args: Vec<Term>) -> Result<Term, TermError> {
        if sym.arity() != args.len() {
            return Err(TermError::Arity {
                symbol: sym.name().to_string(),
                expected: sym.arity(),
                found: args.len(),
            });
        }
        for (expected, arg) in sym.arg_sorts().iter().zip(&args) {
            let found = arg.sort();
            if &found != expected {
                return Err(TermError::SortMismatch {
                    expected: expected.clone(),
                    found,
                });
            }
        }
        Ok(Term::App(sym.clone(), args))
    }

    pub fn sort(&self) -> Sort {
        match self {
            Term::Var(v) => v.sort().clone(),
            Term::Int(_) => Sort::Int,
            Term::Bool(_) => Sort::Bool,
            Term::Op(op, _) => op.result_sort(),
            Term::App(f, _) => f.result_sort().clone(),
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Op(_, args) | Term::App(_, args) => args,
            _ => &[],
        }
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_value(&self) -> Option<Value> {
        match self {
            Term::Int(n) => Some(Value::Int(n.clone())),
            Term::Bool(b) => Some(Value::Bool(*b)),
            _ => None,
        }
    }

    pub fn is_value(&self) -> bool {
        matches!(self, Term::Int(_) | Term::Bool(_))
    }

    /// True when no term-signature symbol occurs (a logical term).
    pub fn is_logical(&self) -> bool {
        match self {
            Term::App(..) => false,
            Term::Op(_, args) => args.iter().all(Term::is_logical),
            _ => true,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Int(_) | Term::Bool(_) => true,
            Term::Op(_, args) | Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn root_fun(&self) -> Option<&Arc<FunSym>> {
        match self {
            Term::App(f, _) => Some(f),
            _ => None,
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Op(_, args) | Term::App(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            _ => {}
        }
    }

    /// Variables in order of first occurrence (left to right).
    pub fn vars_ordered(&self) -> Vec<Var> {
        fn go(t: &Term, out: &mut Vec<Var>) {
            match t {
                Term::Var(v) => {
                    if !out.contains(v) {
                        out.push(v.clone());
                    }
                }
                Term::Op(_, args) | Term::App(_, args) => args.iter().for_each(|a| go(a, out)),
                _ => {}
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    pub fn contains_var(&self, v: &Var) -> bool {
        match self {
            Term::Var(w) => w == v,
            Term::Op(_, args) | Term::App(_, args) => args.iter().any(|a| a.contains_var(v)),
            _ => false,
        }
    }

    pub fn is_linear(&self) -> bool {
        fn go(t: &Term, seen: &mut BTreeSet<Var>) -> bool {
            match t {
                Term::Var(v) => seen.insert(v.clone()),
                Term::Op(_, args) | Term::App(_, args) => args.iter().all(|a| go(a, seen)),
                _ => true,
            }
        }
        go(self, &mut BTreeSet::new())
    }

    pub fn size(&self) -> usize {
        1 + self.args().iter().map(Term::size).sum::<usize>()
    }

    /// All positions in pre-order (root first, then arguments left to right).
    pub fn positions(&self) -> Vec<Position> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        fn go(t: &Term, path: &mut Vec<usize>, out: &mut Vec<Position>) {
            out.push(Position(path.clone()));
            for (i, a) in t.args().iter().enumerate() {
                path.push(i + 1);
                go(a, path, out);
                path.pop();
            }
        }
        go(self, &mut path, &mut out);
        out
    }

    pub fn subterm_at(&self, pos: &Position) -> Result<&Term, TermError> {
        let mut cur = self;
        for &i in &pos.0 {
            cur = i
                .checked_sub(1)
                .and_then(|k| cur.args().get(k))
                .ok_or_else(|| TermError::InvalidPosition {
                    pos: pos.clone(),
                    term: self.to_string(),
                })?;
        }
        Ok(cur)
    }

    pub fn replace_at(&self, pos: &Position, with: Term) -> Result<Term, TermError> {
        let old = self.subterm_at(pos)?;
        let (expected, found) = (old.sort(), with.sort());
        if expected != found {
            return Err(TermError::SortMismatch { expected, found });
        }
        Ok(self.replace_unchecked(&pos.0, with))
    }

    fn replace_unchecked(&self, path: &[usize], with: Term) -> Term {
        match path.split_first() {
            None => with,
            Some((&i, rest)) => {
                let mut t = self.clone();
                match &mut t {
                    Term::Op(_, args) | Term::App(_, args) => {
                        args[i - 1] = args[i - 1].replace_unchecked(rest, with);
                    }
                    _ => unreachable!("validated position"),
                }
                t
            }
        }
    }

    pub fn apply(&self, subst: &Substitution) -> Term {
        if subst.is_empty() {
            return self.clone();
        }
        match self {
            Term::Var(v) => subst.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Op(op, args) => Term::Op(*op, args.iter().map(|a| a.apply(subst)).collect()),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.apply(subst)).collect()),
            _ => self.clone(),
        }
    }

    /// Replaces every occurrence of `pattern` (as a subterm) by `with`.
    pub fn replace_subterm(&self, pattern: &Term, with: &Term) -> Term {
        if self == pattern {
            return with.clone();
        }
        match self {
            Term::Op(op, args) => Term::Op(
                *op,
                args.iter().map(|a| a.replace_subterm(pattern, with)).collect(),
            ),
            Term::App(f, args) => Term::App(
                f.clone(),
                args.iter().map(|a| a.replace_subterm(pattern, with)).collect(),
            ),
            _ => self.clone(),
        }
    }
}

impl From<Var> for Term {
    fn from(v: Var) -> Term {
        Term::Var(v)
    }
}

/// A path of 1-based argument indices; the empty path is the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position(pub Vec<usize>);

impl Position {
    pub fn root() -> Position {
        Position(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: usize) -> Position {
        let mut p = self.0.clone();
        p.push(i);
        Position(p)
    }

    /// `i.self`
    pub fn under(&self, i: usize) -> Position {
        let mut p = vec![i];
        p.extend_from_slice(&self.0);
        Position(p)
    }

    pub fn is_prefix_of(&self, other: &Position) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join("."))
    }
}

impl std::str::FromStr for Position {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "ε" || s == "e" || s == "root" {
            return Ok(Position::root());
        }
        s.split('.')
            .map(|p| match p.parse::<usize>() {
                Ok(0) | Err(_) => Err(format!("bad position component '{p}'")),
                Ok(n) => Ok(n),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Position)
    }
}

/// Finite, sort-preserving map from variables to terms.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Substitution(BTreeMap<Var, Term>);

impl Substitution {
    pub fn new() -> Substitution {
        Substitution(BTreeMap::new())
    }

    pub fn insert(&mut self, v: Var, t: Term) -> Result<(), TermError> {
        let found = t.sort();
        if &found != v.sort() {
            return Err(TermError::SortMismatch {
                expected: v.sort().clone(),
                found,
            });
        }
        if t.as_var() == Some(&v) {
            self.0.remove(&v);
        } else {
            self.0.insert(v, t);
        }
        Ok(())
    }

    pub fn from_pairs<I: IntoIterator<Item = (Var, Term)>>(pairs: I) -> Result<Self, TermError> {
        let mut s = Substitution::new();
        for (v, t) in pairs {
            s.insert(v, t)?;
        }
        Ok(s)
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.0.get(v)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.0.iter()
    }

    /// `self` then `other`: t(self∘other) = (t self) other.
    pub fn then(&self, other: &Substitution) -> Substitution {
        let mut out = BTreeMap::new();
        for (v, t) in &self.0 {
            let img = t.apply(other);
            if img.as_var() != Some(v) {
                out.insert(v.clone(), img);
            }
        }
        for (v, t) in &other.0 {
            out.entry(v.clone()).or_insert_with(|| t.clone());
        }
        Substitution(out)
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (v, t)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v} ↦ {t}")?;
        }
        f.write_str("}")
    }
}

/// One-sided matching: finds γ with `pattern γ = subject`.
pub fn match_term(pattern: &Term, subject: &Term) -> Option<Substitution> {
    let mut binding: BTreeMap<Var, Term> = BTreeMap::new();
    if match_into(pattern, subject, &mut binding) {
        let mut s = Substitution::new();
        for (v, t) in binding {
            s.insert(v, t).ok()?;
        }
        Some(s)
    } else {
        None
    }
}

fn match_into(pattern: &Term, subject: &Term, binding: &mut BTreeMap<Var, Term>) -> bool {
    match (pattern, subject) {
        (Term::Var(v), _) => {
            if v.sort() != &subject.sort() {
                return false;
            }
            match binding.get(v) {
                Some(bound) => bound == subject,
                None => {
                    binding.insert(v.clone(), subject.clone());
                    true
                }
            }
        }
        (Term::Op(p, pargs), Term::Op(s, sargs)) if p == s => pargs
            .iter()
            .zip(sargs)
            .all(|(a, b)| match_into(a, b, binding)),
        (Term::App(f, pargs), Term::App(g, sargs)) if f == g => pargs
            .iter()
            .zip(sargs)
            .all(|(a, b)| match_into(a, b, binding)),
        _ => pattern == subject,
    }
}

/// Syntactic unification with occurs check. Returns an idempotent mgu;
/// variable-variable pairs bind the variable from `t` to the one from `s`.
pub fn unify(s: &Term, t: &Term) -> Option<Substitution> {
    let mut sigma = Substitution::new();
    let mut stack = vec![(s.clone(), t.clone())];
    while let Some((a, b)) = stack.pop() {
        let a = a.apply(&sigma);
        let b = b.apply(&sigma);
        if a == b {
            continue;
        }
        match (&a, &b) {
            (_, Term::Var(v)) => bind(&mut sigma, v, &a)?,
            (Term::Var(v), _) => bind(&mut sigma, v, &b)?,
            (Term::Op(f, xs), Term::Op(g, ys)) if f == g => {
                stack.extend(xs.iter().cloned().zip(ys.iter().cloned()));
            }
            (Term::App(f, xs), Term::App(g, ys)) if f == g => {
                stack.extend(xs.iter().cloned().zip(ys.iter().cloned()));
            }
            _ => return None,
        }
    }
    Some(sigma)
}

fn bind(sigma: &mut Substitution, v: &Var, t: &Term) -> Option<()> {
    if t.contains_var(v) || v.sort() != &t.sort() {
        return None;
    }
    let single = Substitution::from_pairs([(v.clone(), t.clone())]).ok()?;
    let mut next = sigma.then(&single);
    next.insert(v.clone(), t.clone()).ok()?;
    *sigma = next;
    Some(())
}

/// Renames every variable of `terms` to a fresh one; returns the renaming.
pub fn renaming_apart<'a, I: IntoIterator<Item = &'a Term>>(terms: I) -> Substitution {
    let mut vars = BTreeSet::new();
    for t in terms {
        t.collect_vars(&mut vars);
    }
    let mut s = Substitution::new();
    for v in vars {
        let fresh = Var::fresh(v.sort().clone());
        s.insert(v, Term::Var(fresh)).expect("same sort");
    }
    s
}
