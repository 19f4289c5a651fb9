//! Proof tableaux: annotated programs whose assertions form a flattened
//! Hoare-logic derivation. Each condition becomes an obligation that can be
//! re-discharged on its own from the program and its line numbers.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::solver::{Model, Solver, SolverVerdict};
use crate::terms::{Substitution, Term};
use crate::theory::build;
use crate::whilelang::{Command, WhileAst};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObligationKind {
    /// A maximal command sequence is longer than two and starts and ends
    /// with assertions.
    Sequence,
    /// `@φ; @ψ` with `φ ⟹ ψ` valid.
    Implication,
    /// `@φ; x := e; @ψ` with `φ` equal to `ψ{x ↦ e}`.
    Assignment,
    /// `@φ; skip; @ψ` with `φ ⟺ ψ`.
    Skip,
    IfShape,
    WhileShape,
}

impl fmt::Display for ObligationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObligationKind::Sequence => "sequence",
            ObligationKind::Implication => "implication",
            ObligationKind::Assignment => "assignment",
            ObligationKind::Skip => "skip",
            ObligationKind::IfShape => "if-shape",
            ObligationKind::WhileShape => "while-shape",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Status {
    Discharged {
        /// Set when only a semantic check succeeded where a syntactic match was expected.
        #[serde(skip_serializing_if = "Option::is_none")]
        warning: Option<String>,
    },
    Violated {
        reason: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        counterexample: Option<Model>,
    },
    Unknown {
        reason: String,
    },
}

impl Status {
    fn ok() -> Status {
        Status::Discharged { warning: None }
    }

    fn violated(reason: impl Into<String>) -> Status {
        Status::Violated {
            reason: reason.into(),
            counterexample: None,
        }
    }

    pub fn is_discharged(&self) -> bool {
        matches!(self, Status::Discharged { .. })
    }

    pub fn is_violated(&self) -> bool {
        matches!(self, Status::Violated { .. })
    }

    /// Combines two results, keeping the worse one.
    fn and(self, other: Status) -> Status {
        match (&self, &other) {
            (Status::Violated { .. }, _) => self,
            (_, Status::Violated { .. }) => other,
            (Status::Unknown { .. }, _) => self,
            (_, Status::Unknown { .. }) => other,
            (Status::Discharged { warning: Some(_) }, _) => self,
            _ => other,
        }
    }
}

/// One condition of the tableau definition at specific lines.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Obligation {
    pub kind: ObligationKind,
    /// The lines involved: for implications the two assertions, for
    /// commands the preceding assertion, the command lines and the
    /// following assertion, for sequences the first and last element.
    pub lines: Vec<usize>,
    #[serde(flatten)]
    pub status: Status,
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.lines.iter().map(|l| l.to_string()).collect();
        write!(f, "{} at lines {}: ", self.kind, lines.join(","))?;
        match &self.status {
            Status::Discharged { warning: None } => f.write_str("discharged"),
            Status::Discharged { warning: Some(w) } => write!(f, "discharged ({w})"),
            Status::Violated {
                reason,
                counterexample: Some(m),
            } => write!(f, "violated: {reason}; counterexample {m}"),
            Status::Violated { reason, .. } => write!(f, "violated: {reason}"),
            Status::Unknown { reason } => write!(f, "unknown: {reason}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableauError {
    #[error("{} obligation(s) violated, first: {}", .0.len(), .0[0])]
    Violated(Vec<Obligation>),
    #[error("{} obligation(s) could not be decided, first: {}", .0.len(), .0[0])]
    Undecided(Vec<Obligation>),
}

impl TableauError {
    pub fn obligations(&self) -> &[Obligation] {
        match self {
            TableauError::Violated(o) | TableauError::Undecided(o) => o,
        }
    }
}

/// A program whose obligations have all been discharged.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Tableau {
    ast: WhileAst,
    obligations: Vec<Obligation>,
}

impl Tableau {
    pub fn ast(&self) -> &WhileAst {
        &self.ast
    }

    pub fn obligations(&self) -> &[Obligation] {
        &self.obligations
    }

    pub fn warnings(&self) -> impl Iterator<Item = (&Obligation, &str)> {
        self.obligations.iter().filter_map(|o| match &o.status {
            Status::Discharged { warning: Some(w) } => Some((o, w.as_str())),
            _ => None,
        })
    }

    /// Pre-condition, stripped program and post-condition.
    pub fn hoare_triple(&self) -> (Term, WhileAst, Term) {
        let lines = self.ast.lines();
        let assertion = |k: usize| match &lines[k].command {
            Command::Assert { cond } => cond.clone(),
            _ => unreachable!("validated tableaux start and end with assertions"),
        };
        (assertion(0), self.ast.strip_annotations(), assertion(lines.len() - 2))
    }
}

/// An element of a command sequence.
#[derive(Clone, Debug)]
enum Item {
    Assert(usize),
    Simple(usize),
    If {
        open: usize,
        else_line: usize,
        close: usize,
        then_seq: Vec<Item>,
        else_seq: Vec<Item>,
    },
    While {
        open: usize,
        close: usize,
        body: Vec<Item>,
    },
}

impl Item {
    fn first_line(&self) -> usize {
        match self {
            Item::Assert(l) | Item::Simple(l) => *l,
            Item::If { open, .. } | Item::While { open, .. } => *open,
        }
    }

    fn last_line(&self) -> usize {
        match self {
            Item::Assert(l) | Item::Simple(l) => *l,
            Item::If { close, .. } | Item::While { close, .. } => *close,
        }
    }

    fn assert_line(&self) -> Option<usize> {
        match self {
            Item::Assert(l) => Some(*l),
            _ => None,
        }
    }
}

/// Splits lines `[from, to)` (indices) into a sequence.
fn sequence(ast: &WhileAst, from: usize, to: usize) -> Vec<Item> {
    let lines = ast.lines();
    let idx = |n: usize| lines.iter().position(|l| l.number == n).expect("own line");
    let mut out = Vec::new();
    let mut k = from;
    while k < to {
        let l = &lines[k];
        match &l.command {
            Command::Assert { .. } => {
                out.push(Item::Assert(l.number));
                k += 1;
            }
            Command::Assign { .. } | Command::Skip => {
                out.push(Item::Simple(l.number));
                k += 1;
            }
            Command::IfOpen { .. } => {
                let Some(crate::whilelang::Block::If { else_line, close, .. }) = ast.block(l.number) else {
                    unreachable!("checked structure")
                };
                let (e, c) = (idx(else_line), idx(close));
                out.push(Item::If {
                    open: l.number,
                    else_line,
                    close,
                    then_seq: sequence(ast, k + 1, e),
                    else_seq: sequence(ast, e + 1, c),
                });
                k = c + 1;
            }
            Command::WhileOpen { .. } => {
                let Some(crate::whilelang::Block::While { close, .. }) = ast.block(l.number) else {
                    unreachable!("checked structure")
                };
                let c = idx(close);
                out.push(Item::While {
                    open: l.number,
                    close,
                    body: sequence(ast, k + 1, c),
                });
                k = c + 1;
            }
            Command::ElseOpen | Command::Close | Command::Blank => unreachable!("consumed by the opener"),
        }
    }
    out
}

fn all_sequences(seq: &[Item], out: &mut Vec<Vec<Item>>) {
    out.push(seq.to_vec());
    for item in seq {
        match item {
            Item::If { then_seq, else_seq, .. } => {
                all_sequences(then_seq, out);
                all_sequences(else_seq, out);
            }
            Item::While { body, .. } => all_sequences(body, out),
            _ => {}
        }
    }
}

/// An obligation before it is discharged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pending {
    pub kind: ObligationKind,
    pub lines: Vec<usize>,
}

/// The obligations of `ast` in program order, undischarged.
pub fn collect_obligations(ast: &WhileAst) -> Vec<Pending> {
    let n = ast.lines().len();
    let top = sequence(ast, 0, n - 1);
    let mut seqs = Vec::new();
    all_sequences(&top, &mut seqs);
    let mut out = Vec::new();
    for seq in &seqs {
        out.push(Pending {
            kind: ObligationKind::Sequence,
            lines: match (seq.first(), seq.last()) {
                (Some(a), Some(b)) => vec![a.first_line(), b.last_line()],
                _ => Vec::new(),
            },
        });
        for (k, item) in seq.iter().enumerate() {
            let before = k.checked_sub(1).and_then(|j| seq[j].assert_line());
            let after = seq.get(k + 1).and_then(Item::assert_line);
            let around = |mid: Vec<usize>| {
                let mut v = vec![before.unwrap_or(0)];
                v.extend(mid);
                v.push(after.unwrap_or(0));
                v
            };
            match item {
                Item::Assert(l) => {
                    if let Some(next) = after {
                        out.push(Pending {
                            kind: ObligationKind::Implication,
                            lines: vec![*l, next],
                        });
                    }
                }
                Item::Simple(l) => {
                    let kind = match ast.line(*l).map(|x| &x.command) {
                        Some(Command::Skip) => ObligationKind::Skip,
                        _ => ObligationKind::Assignment,
                    };
                    out.push(Pending {
                        kind,
                        lines: around(vec![*l]),
                    });
                }
                Item::If {
                    open, else_line, close, ..
                } => out.push(Pending {
                    kind: ObligationKind::IfShape,
                    lines: around(vec![*open, *else_line, *close]),
                }),
                Item::While { open, close, .. } => out.push(Pending {
                    kind: ObligationKind::WhileShape,
                    lines: around(vec![*open, *close]),
                }),
            }
        }
    }
    // Sequences are listed before their contents; sort by position instead.
    out.sort_by_key(|p| (p.lines.iter().copied().find(|&l| l > 0).unwrap_or(0), p.kind != ObligationKind::Sequence));
    out
}

/// Surface equality: same conjuncts in the same order, literal `true` ignored.
pub fn same_formula(a: &Term, b: &Term) -> bool {
    let flat = |t: &Term| -> Vec<Term> {
        build::conjuncts(t)
            .into_iter()
            .filter(|c| *c != Term::tt())
            .collect()
    };
    flat(a) == flat(b)
}

/// Expects `actual` to be `expected`, syntactically or else logically.
fn expect_formula(solver: &Solver, what: &str, actual: &Term, expected: &Term) -> Status {
    if same_formula(actual, expected) {
        return Status::ok();
    }
    match solver.check_equiv(actual, expected) {
        SolverVerdict::Valid => Status::Discharged {
            warning: Some(format!("{what}: {actual} is only logically equivalent to {expected}")),
        },
        SolverVerdict::Invalid(m) => Status::Violated {
            reason: format!("{what}: expected {expected}, found {actual}"),
            counterexample: Some(m),
        },
        SolverVerdict::Unknown(r) => Status::Unknown {
            reason: format!("{what}: cannot compare {actual} with {expected}: {r}"),
        },
    }
}

fn expect_equivalent(solver: &Solver, what: &str, a: &Term, b: &Term) -> Status {
    if same_formula(a, b) {
        return Status::ok();
    }
    match solver.check_equiv(a, b) {
        SolverVerdict::Valid => Status::ok(),
        SolverVerdict::Invalid(m) => Status::Violated {
            reason: format!("{what}: {a} and {b} are not equivalent"),
            counterexample: Some(m),
        },
        SolverVerdict::Unknown(r) => Status::Unknown {
            reason: format!("{what}: {r}"),
        },
    }
}

fn assertion_at(ast: &WhileAst, line: usize) -> Option<&Term> {
    match ast.line(line).map(|l| &l.command) {
        Some(Command::Assert { cond }) => Some(cond),
        _ => None,
    }
}

/// The assertion on the line right after / before `line`, if any.
fn neighbour_assertion(ast: &WhileAst, line: usize, forward: bool) -> Option<(usize, &Term)> {
    let lines = ast.lines();
    let k = lines.iter().position(|l| l.number == line)?;
    let j = if forward { k + 1 } else { k.checked_sub(1)? };
    let l = lines.get(j)?;
    match &l.command {
        Command::Assert { cond } => Some((l.number, cond)),
        _ => None,
    }
}

/// Checks one obligation from scratch.
pub fn discharge(ast: &WhileAst, p: &Pending, solver: &Solver) -> Obligation {
    let status = discharge_status(ast, p, solver);
    Obligation {
        kind: p.kind,
        lines: p.lines.clone(),
        status,
    }
}

fn discharge_status(ast: &WhileAst, p: &Pending, solver: &Solver) -> Status {
    let lines = &p.lines;
    if p.kind == ObligationKind::Sequence {
        let (Some(&first), Some(&last)) = (lines.first(), lines.last()) else {
            return Status::violated("empty command sequence");
        };
        let items = sequence_len(ast, first, last);
        if items <= 2 {
            return Status::violated(format!("command sequence has {items} element(s), more than two are required"));
        }
        if assertion_at(ast, first).is_none() {
            return Status::violated(format!("sequence does not start with an assertion (line {first})"));
        }
        if assertion_at(ast, last).is_none() {
            return Status::violated(format!("sequence does not end with an assertion (line {last})"));
        }
        return Status::ok();
    }
    if p.kind == ObligationKind::Implication {
        let (Some(a), Some(b)) = (assertion_at(ast, lines[0]), assertion_at(ast, lines[1])) else {
            return Status::violated("implication between non-assertions");
        };
        return match solver.check_implies(a, b) {
            SolverVerdict::Valid => Status::ok(),
            SolverVerdict::Invalid(m) => Status::Violated {
                reason: format!("{a} does not imply {b}"),
                counterexample: Some(m),
            },
            SolverVerdict::Unknown(r) => Status::Unknown { reason: r },
        };
    }
    let pre = assertion_at(ast, lines[0]);
    let post = assertion_at(ast, *lines.last().expect("nonempty"));
    let (Some(pre), Some(post)) = (pre, post) else {
        return Status::violated(format!(
            "the {} on line {} must be preceded and followed by assertions",
            p.kind, lines[1]
        ));
    };
    let cmd = &ast.line(lines[1]).expect("command line").command;
    match (p.kind, cmd) {
        (ObligationKind::Assignment, Command::Assign { var, expr }) => {
            let s = Substitution::from_pairs([(var.clone(), expr.clone())]).expect("int var and expression");
            expect_formula(solver, "assignment", pre, &post.apply(&s))
        }
        (ObligationKind::Skip, Command::Skip) => expect_equivalent(solver, "skip", pre, post),
        (ObligationKind::IfShape, Command::IfOpen { cond }) => {
            let (open, else_line, close) = (lines[1], lines[2], lines[3]);
            let mut st = Status::ok();
            let heads = [
                ("then-branch head", open, build::and(pre.clone(), cond.clone())),
                ("else-branch head", else_line, build::and(pre.clone(), build::not(cond.clone()))),
            ];
            for (what, at, expected) in heads {
                st = st.and(match neighbour_assertion(ast, at, true) {
                    Some((_, head)) => expect_formula(solver, what, head, &expected),
                    None => Status::violated(format!("{what} after line {at} is not an assertion")),
                });
            }
            for (what, at) in [("then-branch end", else_line), ("else-branch end", close)] {
                st = st.and(match neighbour_assertion(ast, at, false) {
                    Some((_, last)) => expect_equivalent(solver, what, last, post),
                    None => Status::violated(format!("{what} before line {at} is not an assertion")),
                });
            }
            st
        }
        (ObligationKind::WhileShape, Command::WhileOpen { invariant, guard, .. }) => {
            let (open, close) = (lines[1], lines[2]);
            let Some(inv) = invariant else {
                return Status::violated(format!("while statement on line {open} has no invariant"));
            };
            let mut st = expect_formula(solver, "assertion before the loop", pre, inv);
            st = st.and(match neighbour_assertion(ast, open, true) {
                Some((_, head)) => expect_formula(solver, "loop body head", head, &build::and(inv.clone(), guard.clone())),
                None => Status::violated(format!("loop body after line {open} does not start with an assertion")),
            });
            st = st.and(match neighbour_assertion(ast, close, false) {
                Some((_, last)) => expect_formula(solver, "loop body end", last, inv),
                None => Status::violated(format!("loop body before line {close} does not end with an assertion")),
            });
            st.and(expect_formula(
                solver,
                "assertion after the loop",
                post,
                &build::and(inv.clone(), build::not(guard.clone())),
            ))
        }
        _ => Status::violated(format!("line {} does not hold a {}", lines[1], p.kind)),
    }
}

/// Number of elements of the sequence spanning `first..=last`.
fn sequence_len(ast: &WhileAst, first: usize, last: usize) -> usize {
    let lines = ast.lines();
    let (Some(a), Some(b)) = (
        lines.iter().position(|l| l.number == first),
        lines.iter().position(|l| l.number == last),
    ) else {
        return 0;
    };
    sequence(ast, a, b + 1).len()
}

/// Discharges every obligation, reporting all of them.
pub fn check_all(ast: &WhileAst, solver: &Solver) -> Vec<Obligation> {
    let pending = collect_obligations(ast);
    if pending.is_empty() {
        return vec![Obligation {
            kind: ObligationKind::Sequence,
            lines: Vec::new(),
            status: Status::violated("empty program"),
        }];
    }
    pending.iter().map(|p| discharge(ast, p, solver)).collect()
}

/// Validates `ast` as a proof tableau.
pub fn check_tableau(ast: &WhileAst, solver: &Solver) -> Result<Tableau, TableauError> {
    let obligations = check_all(ast, solver);
    let violated: Vec<Obligation> = obligations.iter().filter(|o| o.status.is_violated()).cloned().collect();
    if !violated.is_empty() {
        return Err(TableauError::Violated(violated));
    }
    let undecided: Vec<Obligation> = obligations
        .iter()
        .filter(|o| !o.status.is_discharged())
        .cloned()
        .collect();
    if !undecided.is_empty() {
        return Err(TableauError::Undecided(undecided));
    }
    Ok(Tableau {
        ast: ast.clone(),
        obligations,
    })
}
