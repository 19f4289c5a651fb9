//! The built-in integer/boolean theory: calculation symbols, their total
//! interpretation, ground evaluation and constraint helpers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Euclid, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lctrs::ConstrainedRule;
use crate::terms::{Sort, Substitution, Term, Var};

/// Largest exponent `exp` will compute for bases other than -1, 0 and 1.
pub const MAX_EXPONENT: u32 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("term is not ground: variable {0}")]
    NotGround(String),
    #[error("term symbol {0} is not a theory symbol")]
    NotLogical(String),
    #[error("exponent {0} is too large")]
    ExponentTooLarge(BigInt),
    #[error("ill-sorted theory application {0}")]
    IllSorted(String),
}

/// Calculation symbols of the integer theory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Exp,
    Ge,
    Gt,
    Eq,
    Ne,
    And,
    Or,
    Implies,
    Not,
}

impl Op {
    pub const ALL: [Op; 14] = [
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::Mod,
        Op::Exp,
        Op::Ge,
        Op::Gt,
        Op::Eq,
        Op::Ne,
        Op::And,
        Op::Or,
        Op::Implies,
        Op::Not,
    ];

    pub fn arity(self) -> usize {
        if self == Op::Not {
            1
        } else {
            2
        }
    }

    pub fn result_sort(self) -> Sort {
        match self {
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Mod | Op::Exp => Sort::Int,
            _ => Sort::Bool,
        }
    }

    /// Argument sort, or `None` for the polymorphic `=` and `≠`.
    pub fn arg_sort(self) -> Option<Sort> {
        match self {
            Op::Eq | Op::Ne => None,
            Op::And | Op::Or | Op::Implies | Op::Not => Some(Sort::Bool),
            _ => Some(Sort::Int),
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, Op::Ge | Op::Gt | Op::Eq | Op::Ne)
    }

    pub fn is_connective(self) -> bool {
        matches!(self, Op::And | Op::Or | Op::Implies | Op::Not)
    }

    /// Canonical ASCII spelling.
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "div",
            Op::Mod => "mod",
            Op::Exp => "exp",
            Op::Ge => ">=",
            Op::Gt => ">",
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::And => "&&",
            Op::Or => "||",
            Op::Implies => "==>",
            Op::Not => "!",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.symbol() == s)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// An element of a theory carrier.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
}

impl Value {
    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(n) => Some(n),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Int(_) => None,
        }
    }

    pub fn sort(&self) -> Sort {
        match self {
            Value::Int(_) => Sort::Int,
            Value::Bool(_) => Sort::Bool,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Decodes a value symbol into its carrier element.
pub fn decode(t: &Term) -> Option<Value> {
    t.as_value()
}

/// Encodes a carrier element as its value symbol.
pub fn encode(v: &Value) -> Term {
    Term::from_value(v)
}

fn int_div(a: &BigInt, b: &BigInt) -> BigInt {
    if b.is_zero() {
        BigInt::zero()
    } else {
        a.div_euclid(b)
    }
}

fn int_mod(a: &BigInt, b: &BigInt) -> BigInt {
    if b.is_zero() {
        BigInt::zero()
    } else {
        a.rem_euclid(b)
    }
}

fn int_exp(base: &BigInt, k: &BigInt) -> Result<BigInt, EvalError> {
    if k.is_negative() {
        return Ok(BigInt::zero());
    }
    if base.is_zero() {
        return Ok(if k.is_zero() { BigInt::one() } else { BigInt::zero() });
    }
    if base.is_one() {
        return Ok(BigInt::one());
    }
    if *base == BigInt::from(-1) {
        return Ok(if (k % 2u32).is_zero() {
            BigInt::one()
        } else {
            BigInt::from(-1)
        });
    }
    match k.to_u32() {
        Some(e) if e <= MAX_EXPONENT => Ok(num_traits::pow::Pow::pow(base, e)),
        _ => Err(EvalError::ExponentTooLarge(k.clone())),
    }
}

/// The interpretation of a calculation symbol on values.
pub fn apply_op(op: Op, args: &[Value]) -> Result<Value, EvalError> {
    let ill = || EvalError::IllSorted(format!("{op} applied to {args:?}"));
    let int = |i: usize| args.get(i).and_then(Value::as_int).ok_or_else(ill);
    let boolean = |i: usize| args.get(i).and_then(Value::as_bool).ok_or_else(ill);
    Ok(match op {
        Op::Add => Value::Int(int(0)? + int(1)?),
        Op::Sub => Value::Int(int(0)? - int(1)?),
        Op::Mul => Value::Int(int(0)? * int(1)?),
        Op::Div => Value::Int(int_div(int(0)?, int(1)?)),
        Op::Mod => Value::Int(int_mod(int(0)?, int(1)?)),
        Op::Exp => Value::Int(int_exp(int(0)?, int(1)?)?),
        Op::Ge => Value::Bool(int(0)? >= int(1)?),
        Op::Gt => Value::Bool(int(0)? > int(1)?),
        Op::Eq | Op::Ne => {
            let (a, b) = (args.first().ok_or_else(ill)?, args.get(1).ok_or_else(ill)?);
            if a.sort() != b.sort() {
                return Err(ill());
            }
            Value::Bool((a == b) == (op == Op::Eq))
        }
        Op::And => Value::Bool(boolean(0)? && boolean(1)?),
        Op::Or => Value::Bool(boolean(0)? || boolean(1)?),
        Op::Implies => Value::Bool(!boolean(0)? || boolean(1)?),
        Op::Not => Value::Bool(!boolean(0)?),
    })
}

/// Evaluates a ground logical term.
pub fn eval_ground(t: &Term) -> Result<Value, EvalError> {
    eval_with(t, &|_| None)
}

/// Evaluates a logical term, looking variables up in `lookup`.
pub fn eval_with(t: &Term, lookup: &dyn Fn(&Var) -> Option<Value>) -> Result<Value, EvalError> {
    match t {
        Term::Int(n) => Ok(Value::Int(n.clone())),
        Term::Bool(b) => Ok(Value::Bool(*b)),
        Term::Var(v) => lookup(v).ok_or_else(|| EvalError::NotGround(v.name().to_string())),
        Term::App(f, _) => Err(EvalError::NotLogical(f.name().to_string())),
        Term::Op(op, args) => {
            let vals = args
                .iter()
                .map(|a| eval_with(a, lookup))
                .collect::<Result<Vec<_>, _>>()?;
            apply_op(*op, &vals)
        }
    }
}

/// Evaluates under a valuation map.
pub fn eval_in(t: &Term, env: &BTreeMap<Var, Value>) -> Result<Value, EvalError> {
    eval_with(t, &|v| env.get(v).cloned())
}

/// Evaluates a constraint under a substitution whose relevant images are values.
pub fn holds_under(phi: &Term, gamma: &Substitution) -> Result<bool, EvalError> {
    let v = eval_with(phi, &|v| gamma.get(v).and_then(Term::as_value))?;
    v.as_bool()
        .ok_or_else(|| EvalError::IllSorted(format!("constraint {phi} is not boolean")))
}

/// `γ` maps every variable of `lvars` to a value and `φγ` evaluates to true.
pub fn respects(gamma: &Substitution, phi: &Term, lvars: &BTreeSet<Var>) -> bool {
    let all_values = lvars
        .iter()
        .all(|v| gamma.get(v).is_some_and(Term::is_value));
    all_values && holds_under(phi, gamma).unwrap_or(false)
}

/// The calculation rule `f(x1,…,xn) → y [y = f(x1,…,xn)]` for a calculation symbol.
pub fn calc_rule_for(op: Op) -> ConstrainedRule {
    let arg_sort = op.arg_sort().unwrap_or(Sort::Int);
    let names = ["x", "y"];
    let args: Vec<Term> = (0..op.arity())
        .map(|i| Term::var(names[i], arg_sort.clone()))
        .collect();
    let lhs = Term::op(op, args);
    let res = op.result_sort();
    let out = Term::var(if res == Sort::Bool { "b" } else { "z" }, res);
    let guard = Term::op(Op::Eq, vec![out.clone(), lhs.clone()]);
    ConstrainedRule::calc(format!("calc:{}", op.symbol()), lhs, out, guard)
}

/// Constraint construction helpers.
pub mod build {
    use super::*;

    pub fn int(n: i64) -> Term {
        Term::int(n)
    }

    pub fn var(name: &str) -> Term {
        Term::int_var(name)
    }

    pub fn add(a: Term, b: Term) -> Term {
        Term::op(Op::Add, vec![a, b])
    }

    pub fn sub(a: Term, b: Term) -> Term {
        Term::op(Op::Sub, vec![a, b])
    }

    pub fn mul(a: Term, b: Term) -> Term {
        Term::op(Op::Mul, vec![a, b])
    }

    pub fn ge(a: Term, b: Term) -> Term {
        Term::op(Op::Ge, vec![a, b])
    }

    pub fn gt(a: Term, b: Term) -> Term {
        Term::op(Op::Gt, vec![a, b])
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::op(Op::Eq, vec![a, b])
    }

    pub fn ne(a: Term, b: Term) -> Term {
        Term::op(Op::Ne, vec![a, b])
    }

    pub fn not(a: Term) -> Term {
        Term::op(Op::Not, vec![a])
    }

    pub fn implies(a: Term, b: Term) -> Term {
        Term::op(Op::Implies, vec![a, b])
    }

    pub fn or(a: Term, b: Term) -> Term {
        Term::op(Op::Or, vec![a, b])
    }

    /// Conjunction that drops a literal `true` operand.
    pub fn and(a: Term, b: Term) -> Term {
        match (&a, &b) {
            (Term::Bool(true), _) => b,
            (_, Term::Bool(true)) => a,
            _ => Term::op(Op::And, vec![a, b]),
        }
    }

    pub fn iff(a: Term, b: Term) -> Term {
        Term::op(
            Op::And,
            vec![implies(a.clone(), b.clone()), implies(b, a)],
        )
    }

    /// Left-associated conjunction; empty gives `true`.
    pub fn conj<I: IntoIterator<Item = Term>>(items: I) -> Term {
        items.into_iter().fold(Term::tt(), and)
    }

    /// Flattens nested conjunctions, left to right.
    pub fn conjuncts(phi: &Term) -> Vec<Term> {
        match phi {
            Term::Op(Op::And, args) => {
                let mut out = conjuncts(&args[0]);
                out.extend(conjuncts(&args[1]));
                out
            }
            _ => vec![phi.clone()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::build::*;
    use super::*;

    fn ev(t: &Term) -> Value {
        eval_ground(t).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(ev(&sub(int(3), int(1))), Value::Int(2.into()));
        let div = Term::op(Op::Div, vec![int(7), int(0)]);
        assert_eq!(ev(&div), Value::Int(0.into()));
        let m = mul(int(3), mul(int(2), mul(int(1), int(1))));
        assert_eq!(ev(&m), Value::Int(6.into()));
    }

    #[test]
    fn division_is_euclidean_and_total() {
        let d = |a: i64, b: i64| ev(&Term::op(Op::Div, vec![int(a), int(b)]));
        let m = |a: i64, b: i64| ev(&Term::op(Op::Mod, vec![int(a), int(b)]));
        assert_eq!(d(-7, 2), Value::Int((-4).into()));
        assert_eq!(m(-7, 2), Value::Int(1.into()));
        assert_eq!(d(7, -2), Value::Int((-3).into()));
        assert_eq!(m(7, -2), Value::Int(1.into()));
        assert_eq!(m(5, 0), Value::Int(0.into()));
        let e = |a: i64, b: i64| ev(&Term::op(Op::Exp, vec![int(a), int(b)]));
        assert_eq!(e(2, 10), Value::Int(1024.into()));
        assert_eq!(e(2, -1), Value::Int(0.into()));
        assert_eq!(e(0, 0), Value::Int(1.into()));
    }

    #[test]
    fn eval_rejects_open_and_term_symbols() {
        assert!(matches!(eval_ground(&var("x")), Err(EvalError::NotGround(_))));
        let f = crate::terms::FunSym::new("f", vec![Sort::Int], Sort::Int);
        let t = Term::app(&f, vec![int(1)]).unwrap();
        assert!(matches!(eval_ground(&t), Err(EvalError::NotLogical(_))));
    }

    #[test]
    fn calc_rule_shapes() {
        let r = calc_rule_for(Op::Sub);
        assert_eq!(r.to_string(), "x - y -> z [z = x - y]");
        assert_eq!(calc_rule_for(Op::Add).to_string(), "x + y -> z [z = x + y]");
        assert_eq!(calc_rule_for(Op::Ge).to_string(), "x >= y -> b [b = (x >= y)]");
    }

    #[test]
    fn respects_examples() {
        let x = Var::int("x");
        let g = Substitution::from_pairs([(x.clone(), int(3))]).unwrap();
        let lv: BTreeSet<Var> = [x.clone()].into();
        assert!(respects(&g, &ge(var("x"), int(0)), &lv));
        let g = Substitution::from_pairs([(x.clone(), int(-1))]).unwrap();
        assert!(!respects(&g, &ge(var("x"), int(0)), &lv));

        let phi = conj([ge(var("x"), int(0)), eq(var("i"), int(0)), eq(var("z"), int(0))]);
        let g = Substitution::from_pairs([
            (Var::int("x"), int(3)),
            (Var::int("i"), int(0)),
            (Var::int("z"), int(0)),
        ])
        .unwrap();
        assert!(respects(&g, &phi, &phi.vars()));
        let partial = Substitution::from_pairs([(Var::int("x"), int(3))]).unwrap();
        assert!(!respects(&partial, &phi, &phi.vars()));
    }

    #[test]
    fn smart_conjunction() {
        let b = Term::var("b", Sort::Bool);
        assert_eq!(and(Term::tt(), b.clone()), b);
        let c = conj([ge(var("x"), int(0)), eq(var("i"), int(0))]);
        assert_eq!(conjuncts(&c).len(), 2);
        assert_eq!(conj(Vec::new()), Term::tt());
    }
}
