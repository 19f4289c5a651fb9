//! Annotated while programs: line-numbered AST, parser, printer and a
//! reference interpreter.

pub mod interp;
pub mod parser;
pub mod print;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::terms::{Term, Var};

pub use interp::{interpret, InterpError, Outcome, Valuation};
pub use parser::{parse_program, parse_program_with_vars};
pub use print::{print_numbered, print_program};

/// The content of one program line.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Command {
    Assign {
        #[serde(serialize_with = "ser_display")]
        var: Var,
        #[serde(serialize_with = "ser_display")]
        expr: Term,
    },
    Skip,
    IfOpen {
        #[serde(serialize_with = "ser_display")]
        cond: Term,
    },
    ElseOpen,
    Close,
    WhileOpen {
        #[serde(serialize_with = "ser_opt_display")]
        invariant: Option<Term>,
        #[serde(serialize_with = "ser_display")]
        guard: Term,
        #[serde(serialize_with = "ser_opt_display")]
        rank: Option<Term>,
    },
    Assert {
        #[serde(serialize_with = "ser_display")]
        cond: Term,
    },
    /// The final line marking the end of the program.
    Blank,
}

fn ser_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn ser_opt_display<T: fmt::Display, S: serde::Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

fn ser_vars<S: serde::Serializer>(vs: &[Var], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(vs.iter().map(|v| v.name()))
}

impl Command {
    pub fn is_assert(&self) -> bool {
        matches!(self, Command::Assert { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Line {
    pub number: usize,
    pub command: Command,
    /// Line in the source text, for diagnostics.
    #[serde(skip)]
    pub src_line: usize,
}

/// The lines belonging to one compound statement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Block {
    If { open: usize, else_line: usize, close: usize },
    While { open: usize, close: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("line {0}: unmatched closing brace")]
    UnmatchedClose(usize),
    #[error("line {0}: else without if")]
    ElseWithoutIf(usize),
    #[error("line {0}: if without else")]
    IfWithoutElse(usize),
    #[error("line {0}: block is never closed")]
    Unclosed(usize),
    #[error("the program must end with exactly one blank line")]
    NoBlankEnd,
    #[error("line numbers must increase")]
    Numbering,
}

/// A line-numbered program with its ordered variable list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WhileAst {
    lines: Vec<Line>,
    #[serde(serialize_with = "ser_vars")]
    vars: Vec<Var>,
    #[serde(skip)]
    blocks: BTreeMap<usize, Block>,
    #[serde(skip)]
    owner: BTreeMap<usize, usize>,
}

impl WhileAst {
    /// Builds an AST, checking bracketing. `vars` defaults to
    /// [`default_var_order`] when `None`.
    pub fn new(lines: Vec<Line>, vars: Option<Vec<Var>>) -> Result<WhileAst, StructureError> {
        if lines.windows(2).any(|w| w[0].number >= w[1].number) {
            return Err(StructureError::Numbering);
        }
        match lines.last() {
            Some(l) if l.command == Command::Blank => {}
            _ => return Err(StructureError::NoBlankEnd),
        }
        if lines[..lines.len() - 1].iter().any(|l| l.command == Command::Blank) {
            return Err(StructureError::NoBlankEnd);
        }
        let mut blocks = BTreeMap::new();
        let mut owner = BTreeMap::new();
        // (opener, else line if seen)
        let mut stack: Vec<(usize, Option<usize>, bool)> = Vec::new();
        for l in &lines {
            match &l.command {
                Command::IfOpen { .. } => stack.push((l.number, None, true)),
                Command::WhileOpen { .. } => stack.push((l.number, None, false)),
                Command::ElseOpen => match stack.last_mut() {
                    Some((open, e @ None, true)) => {
                        *e = Some(l.number);
                        owner.insert(l.number, *open);
                    }
                    _ => return Err(StructureError::ElseWithoutIf(l.number)),
                },
                Command::Close => {
                    let (open, else_line, is_if) = stack.pop().ok_or(StructureError::UnmatchedClose(l.number))?;
                    let block = if is_if {
                        let else_line = else_line.ok_or(StructureError::IfWithoutElse(open))?;
                        Block::If {
                            open,
                            else_line,
                            close: l.number,
                        }
                    } else {
                        Block::While { open, close: l.number }
                    };
                    blocks.insert(open, block);
                    owner.insert(l.number, open);
                }
                _ => {}
            }
        }
        if let Some((open, _, _)) = stack.pop() {
            return Err(StructureError::Unclosed(open));
        }
        let vars = vars.unwrap_or_else(|| default_var_order(&lines));
        Ok(WhileAst {
            lines,
            vars,
            blocks,
            owner,
        })
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// The ordered program variables `x1, …, xn`.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Same program with a different variable order; must list the same variables.
    pub fn with_vars(&self, vars: Vec<Var>) -> Option<WhileAst> {
        let want: BTreeSet<&Var> = self.vars.iter().collect();
        let got: BTreeSet<&Var> = vars.iter().collect();
        (want == got && got.len() == vars.len()).then(|| WhileAst {
            vars,
            ..self.clone()
        })
    }

    pub fn line(&self, number: usize) -> Option<&Line> {
        self.lines
            .binary_search_by_key(&number, |l| l.number)
            .ok()
            .map(|k| &self.lines[k])
    }

    fn index_of(&self, number: usize) -> Option<usize> {
        self.lines.binary_search_by_key(&number, |l| l.number).ok()
    }

    /// The compound statement opened on `open`.
    pub fn block(&self, open: usize) -> Option<Block> {
        self.blocks.get(&open).copied()
    }

    /// The compound statement an `else` or closing line belongs to.
    pub fn block_of(&self, line: usize) -> Option<Block> {
        self.owner.get(&line).and_then(|o| self.block(*o))
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.values()
    }

    /// The next non-assertion line after `number` in textual order.
    pub fn next_command(&self, number: usize) -> Option<usize> {
        let k = self.index_of(number)?;
        self.lines[k + 1..]
            .iter()
            .find(|l| !l.command.is_assert())
            .map(|l| l.number)
    }

    /// The first non-assertion line.
    pub fn first_command(&self) -> usize {
        self.lines
            .iter()
            .find(|l| !l.command.is_assert())
            .map(|l| l.number)
            .expect("a blank last line exists")
    }

    /// Number of the final blank line.
    pub fn end_line(&self) -> usize {
        self.lines.last().expect("nonempty").number
    }

    pub fn assertions(&self) -> impl Iterator<Item = (&Line, &Term)> {
        self.lines.iter().filter_map(|l| match &l.command {
            Command::Assert { cond } => Some((l, cond)),
            _ => None,
        })
    }

    pub fn has_assertions(&self) -> bool {
        self.assertions().next().is_some()
    }

    /// Labels `A1, A2, …` for assertion lines in order.
    pub fn assertion_labels(&self) -> BTreeMap<usize, String> {
        self.assertions()
            .enumerate()
            .map(|(k, (l, _))| (l.number, format!("A{}", k + 1)))
            .collect()
    }

    /// Assertions removed; command lines keep their numbers.
    pub fn strip_annotations(&self) -> WhileAst {
        let lines = self
            .lines
            .iter()
            .filter(|l| !l.command.is_assert())
            .cloned()
            .collect();
        WhileAst::new(lines, Some(self.vars.clone())).expect("removing assertions keeps the structure")
    }

    /// Line numbers are exactly `1..=m`.
    pub fn is_dense(&self) -> bool {
        self.lines.iter().enumerate().all(|(k, l)| l.number == k + 1)
    }

    /// Maximal nesting depth of compound statements.
    pub fn depth(&self) -> usize {
        let (mut d, mut best) = (0usize, 0usize);
        for l in &self.lines {
            match l.command {
                Command::IfOpen { .. } | Command::WhileOpen { .. } => {
                    d += 1;
                    best = best.max(d);
                }
                Command::Close => d -= 1,
                _ => {}
            }
        }
        best
    }
}

/// Variables read before they are written come first, then the rest;
/// each group in order of first occurrence.
pub fn default_var_order(lines: &[Line]) -> Vec<Var> {
    let mut inputs: Vec<Var> = Vec::new();
    let mut locals: Vec<Var> = Vec::new();
    let mut seen = BTreeSet::new();
    let read = |t: &Term, seen: &mut BTreeSet<Var>, inputs: &mut Vec<Var>| {
        for v in t.vars_ordered() {
            if seen.insert(v.clone()) {
                inputs.push(v);
            }
        }
    };
    for l in lines {
        match &l.command {
            Command::Assign { var, expr } => {
                read(expr, &mut seen, &mut inputs);
                if seen.insert(var.clone()) {
                    locals.push(var.clone());
                }
            }
            Command::IfOpen { cond } | Command::Assert { cond } => read(cond, &mut seen, &mut inputs),
            Command::WhileOpen { invariant, guard, rank } => {
                for t in invariant.iter().chain([guard]).chain(rank.iter()) {
                    read(t, &mut seen, &mut inputs);
                }
            }
            _ => {}
        }
    }
    inputs.extend(locals);
    inputs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_and_successors() {
        let src = "i := 0;\nif (x > 0) {\n @ x > 0;\n skip;\n} else {\n skip;\n}\nwhile (i < x) {\n i := i + 1;\n}\n";
        let ast = parse_program(src).unwrap();
        assert_eq!(ast.block(2), Some(Block::If { open: 2, else_line: 5, close: 7 }));
        assert_eq!(ast.block_of(10), Some(Block::While { open: 8, close: 10 }));
        assert_eq!(ast.next_command(2), Some(4));
        assert_eq!(ast.end_line(), 11);
        assert_eq!(ast.depth(), 1);
        assert_eq!(ast.vars(), &[Var::int("x"), Var::int("i")]);
        let stripped = ast.strip_annotations();
        assert!(!stripped.is_dense());
        assert_eq!(stripped.lines().len(), 10);
    }

    #[test]
    fn custom_variable_order() {
        let ast = parse_program("y := x;\n").unwrap();
        let swapped = ast.with_vars(vec![Var::int("y"), Var::int("x")]).unwrap();
        assert_eq!(swapped.vars()[0], Var::int("y"));
        assert!(ast.with_vars(vec![Var::int("y")]).is_none());
    }
}
