//! Reference interpreter. Assertions and invariants are ignored.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use serde::{Serialize, Serializer};
use thiserror::Error;

use super::{Block, Command, WhileAst};
use crate::terms::Var;
use crate::theory::{eval_in, EvalError, Value};

/// Values of the program variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Valuation(pub BTreeMap<Var, BigInt>);

impl Valuation {
    pub fn new() -> Valuation {
        Valuation::default()
    }

    pub fn from_pairs<I, N>(pairs: I) -> Valuation
    where
        I: IntoIterator<Item = (N, i64)>,
        N: AsRef<str>,
    {
        Valuation(
            pairs
                .into_iter()
                .map(|(n, v)| (Var::int(n.as_ref()), BigInt::from(v)))
                .collect(),
        )
    }

    pub fn get(&self, name: &str) -> Option<&BigInt> {
        self.0.get(&Var::int(name))
    }

    pub fn set(&mut self, v: Var, n: BigInt) {
        self.0.insert(v, n);
    }

    /// Values in the order of `vars`.
    pub fn values_in(&self, vars: &[Var]) -> Option<Vec<BigInt>> {
        vars.iter().map(|v| self.0.get(v).cloned()).collect()
    }

    fn env(&self) -> BTreeMap<Var, Value> {
        self.0.iter().map(|(k, v)| (k.clone(), Value::Int(v.clone()))).collect()
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (v, n)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v} ↦ {n}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for Valuation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(self.0.iter().map(|(k, v)| (k.name(), v.to_string())))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Outcome {
    Halted { state: Valuation, steps: u64 },
    /// The budget ran out while at `line`.
    OutOfFuel { line: usize, state: Valuation },
}

impl Outcome {
    pub fn halted(&self) -> Option<&Valuation> {
        match self {
            Outcome::Halted { state, .. } => Some(state),
            Outcome::OutOfFuel { .. } => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InterpError {
    #[error("no value given for variable {0}")]
    Unassigned(String),
    #[error("line {line}: {source}")]
    Eval { line: usize, source: EvalError },
}

/// Runs `ast` from `start`. One unit of fuel is one executed command
/// line, which matches one rewrite step of the converted system.
pub fn interpret(ast: &WhileAst, start: &Valuation, fuel: u64) -> Result<Outcome, InterpError> {
    for v in ast.vars() {
        if !start.0.contains_key(v) {
            return Err(InterpError::Unassigned(v.name().to_string()));
        }
    }
    let mut theta = start.clone();
    let lines = ast.lines();
    let index: BTreeMap<usize, usize> = lines.iter().enumerate().map(|(k, l)| (l.number, k)).collect();
    let after = |n: usize| index[&n] + 1;
    let mut pc = 0usize;
    let mut steps = 0u64;
    loop {
        let line = &lines[pc];
        if line.command.is_assert() {
            pc += 1;
            continue;
        }
        if line.command == Command::Blank {
            return Ok(Outcome::Halted { state: theta, steps });
        }
        if steps == fuel {
            return Ok(Outcome::OutOfFuel {
                line: line.number,
                state: theta,
            });
        }
        steps += 1;
        let eval = |t, theta: &Valuation| {
            eval_in(t, &theta.env()).map_err(|source| InterpError::Eval {
                line: line.number,
                source,
            })
        };
        pc = match &line.command {
            Command::Assign { var, expr } => {
                let Value::Int(n) = eval(expr, &theta)? else {
                    unreachable!("integer expression")
                };
                theta.set(var.clone(), n);
                pc + 1
            }
            Command::Skip => pc + 1,
            Command::IfOpen { cond } => {
                let Some(Block::If { else_line, .. }) = ast.block(line.number) else {
                    unreachable!("checked structure")
                };
                if eval(cond, &theta)? == Value::Bool(true) {
                    pc + 1
                } else {
                    after(else_line)
                }
            }
            Command::ElseOpen => {
                let Some(Block::If { close, .. }) = ast.block_of(line.number) else {
                    unreachable!("checked structure")
                };
                after(close)
            }
            Command::WhileOpen { guard, .. } => {
                let Some(Block::While { close, .. }) = ast.block(line.number) else {
                    unreachable!("checked structure")
                };
                if eval(guard, &theta)? == Value::Bool(true) {
                    pc + 1
                } else {
                    after(close)
                }
            }
            Command::Close => match ast.block_of(line.number) {
                Some(Block::While { open, .. }) => index[&open],
                _ => pc + 1,
            },
            Command::Assert { .. } | Command::Blank => unreachable!("handled above"),
        };
    }
}
