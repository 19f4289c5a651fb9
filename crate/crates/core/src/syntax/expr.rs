use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;
use crate::terms::{FunSym, Sort, Term, Var, FRESH_PREFIX};
use crate::theory::Op;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Slash,
    Div,
    Mod,
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
    Ne,
    And,
    Or,
    Implies,
}

impl BinOp {
    fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Ge | BinOp::Gt | BinOp::Le | BinOp::Lt | BinOp::Eq | BinOp::Ne
        )
    }
}

/// Parsed but not yet sort-checked expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Surf {
    Num(BigInt),
    /// A constant fraction written `n/m` or `½`.
    Rat(BigRational),
    Ident { name: String, line: usize, col: usize },
    Call {
        name: String,
        args: Vec<Surf>,
        line: usize,
        col: usize,
    },
    Bin(BinOp, Box<Surf>, Box<Surf>),
    Neg(Box<Surf>),
    Not(Box<Surf>),
}

impl Surf {
    fn has_rational(&self) -> bool {
        match self {
            Surf::Rat(_) => true,
            Surf::Bin(_, a, b) => a.has_rational() || b.has_rational(),
            Surf::Neg(a) | Surf::Not(a) => a.has_rational(),
            Surf::Call { args, .. } => args.iter().any(Surf::has_rational),
            _ => false,
        }
    }

    /// Least common multiple of the denominators of rational literals.
    fn denominator(&self) -> BigInt {
        match self {
            Surf::Rat(r) => r.denom().clone(),
            Surf::Bin(_, a, b) => a.denominator().lcm(&b.denominator()),
            Surf::Neg(a) | Surf::Not(a) => a.denominator(),
            Surf::Call { args, .. } => args
                .iter()
                .fold(BigInt::one(), |acc, a| acc.lcm(&a.denominator())),
            _ => BigInt::one(),
        }
    }
}

const BP_IMPLIES: u8 = 1;
const BP_OR: u8 = 2;
const BP_AND: u8 = 3;
const BP_NOT: u8 = 4;
const BP_CMP: u8 = 5;
const BP_ADD: u8 = 6;
const BP_MUL: u8 = 7;
const BP_NEG: u8 = 8;

/// Token cursor with expression parsing.
pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    calls: bool,
    fractions: bool,
}

impl Parser {
    pub fn new(src: &str) -> Result<Parser, SyntaxError> {
        Ok(Parser::from_tokens(tokenize(src)?))
    }

    pub fn from_tokens(toks: Vec<Token>) -> Parser {
        Parser {
            toks,
            pos: 0,
            calls: true,
            fractions: true,
        }
    }

    /// With fractions off, `n/m` between literals is integer division.
    pub fn set_fractions(&mut self, on: bool) {
        self.fractions = on;
    }

    /// Disables `f(...)` call syntax, so that `x (` ends an expression.
    pub fn without_calls(mut self) -> Parser {
        self.calls = false;
        self
    }

    pub fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    pub fn peek_at(&self, k: usize) -> &Token {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)]
    }

    pub fn advance(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub fn at(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn at_eof(&self) -> bool {
        self.at(&Tok::Eof)
    }

    pub fn unexpected(&self, expected: &str) -> SyntaxError {
        let t = self.peek();
        SyntaxError::Unexpected {
            line: t.line,
            col: t.col,
            expected: expected.to_string(),
            found: t.tok.to_string(),
        }
    }

    pub fn expect(&mut self, tok: &Tok) -> Result<Token, SyntaxError> {
        if self.at(tok) {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    pub fn expect_ident(&mut self) -> Result<(String, usize, usize), SyntaxError> {
        match self.peek().tok.clone() {
            Tok::Ident(name) => {
                let t = self.advance();
                Ok((name, t.line, t.col))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    pub fn parse_expr(&mut self) -> Result<Surf, SyntaxError> {
        self.parse_bp(0)
    }

    fn parse_bp(&mut self, min_bp: u8) -> Result<Surf, SyntaxError> {
        let mut lhs = self.parse_prefix()?;
        loop {
            let (op, bp) = match self.peek().tok {
                Tok::Implies => (BinOp::Implies, BP_IMPLIES),
                Tok::Or => (BinOp::Or, BP_OR),
                Tok::And => (BinOp::And, BP_AND),
                Tok::Ge => (BinOp::Ge, BP_CMP),
                Tok::Gt => (BinOp::Gt, BP_CMP),
                Tok::Le => (BinOp::Le, BP_CMP),
                Tok::Lt => (BinOp::Lt, BP_CMP),
                Tok::Eq => (BinOp::Eq, BP_CMP),
                Tok::Ne => (BinOp::Ne, BP_CMP),
                Tok::Plus => (BinOp::Add, BP_ADD),
                Tok::Minus => (BinOp::Sub, BP_ADD),
                Tok::Star => (BinOp::Mul, BP_MUL),
                Tok::Slash => (BinOp::Slash, BP_MUL),
                Tok::Ident(ref s) if s == "div" => (BinOp::Div, BP_MUL),
                Tok::Ident(ref s) if s == "mod" => (BinOp::Mod, BP_MUL),
                _ => break,
            };
            if bp <= min_bp {
                break;
            }
            let op_tok = self.advance();
            let rhs = match op {
                BinOp::Implies => self.parse_bp(BP_IMPLIES - 1)?,
                _ if op.is_comparison() => self.parse_bp(BP_CMP)?,
                _ => self.parse_bp(bp)?,
            };
            if op.is_comparison() && (is_comparison_surf(&lhs) || is_comparison_surf(&rhs)) {
                return Err(SyntaxError::Semantic {
                    line: op_tok.line,
                    col: op_tok.col,
                    msg: "comparisons do not chain".into(),
                });
            }
            lhs = match (op, &lhs, &rhs) {
                (BinOp::Slash, Surf::Num(n), Surf::Num(d)) if self.fractions => {
                    if d.is_zero() {
                        return Err(SyntaxError::Semantic {
                            line: op_tok.line,
                            col: op_tok.col,
                            msg: "zero denominator".into(),
                        });
                    }
                    Surf::Rat(BigRational::new(n.clone(), d.clone()))
                }
                _ => Surf::Bin(op, Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn parse_prefix(&mut self) -> Result<Surf, SyntaxError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(n) => {
                self.advance();
                Ok(Surf::Num(n))
            }
            Tok::Half => {
                self.advance();
                Ok(Surf::Rat(BigRational::new(1.into(), 2.into())))
            }
            Tok::Minus => {
                self.advance();
                let inner = self.parse_bp(BP_NEG)?;
                Ok(match inner {
                    Surf::Num(n) => Surf::Num(-n),
                    Surf::Rat(r) => Surf::Rat(-r),
                    other => Surf::Neg(Box::new(other)),
                })
            }
            Tok::Not => {
                self.advance();
                Ok(Surf::Not(Box::new(self.parse_bp(BP_NOT)?)))
            }
            Tok::LParen => {
                self.advance();
                let e = self.parse_bp(0)?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.advance();
                if self.calls && self.at(&Tok::LParen) {
                    self.advance();
                    let mut args = Vec::new();
                    if !self.at(&Tok::RParen) {
                        loop {
                            args.push(self.parse_bp(0)?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect(&Tok::RParen)?;
                    Ok(Surf::Call {
                        name,
                        args,
                        line: t.line,
                        col: t.col,
                    })
                } else {
                    Ok(Surf::Ident {
                        name,
                        line: t.line,
                        col: t.col,
                    })
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

fn is_comparison_surf(s: &Surf) -> bool {
    matches!(s, Surf::Bin(op, _, _) if op.is_comparison())
}

/// Name and sort resolution used when turning [`Surf`] into [`Term`].
pub struct Lowering<'a> {
    /// Term symbols in scope.
    pub funs: &'a BTreeMap<String, Arc<FunSym>>,
    /// Variables seen so far with their sorts; unseen names take the sort
    /// demanded by context (int by default).
    pub vars: BTreeMap<String, Sort>,
    /// Constant fractions are cleared inside comparisons when set.
    pub allow_rationals: bool,
    /// Names that must already be in `vars`.
    pub closed: bool,
}

impl<'a> Lowering<'a> {
    pub fn new(funs: &'a BTreeMap<String, Arc<FunSym>>) -> Lowering<'a> {
        Lowering {
            funs,
            vars: BTreeMap::new(),
            allow_rationals: false,
            closed: false,
        }
    }

    pub fn lower(&mut self, s: &Surf, expected: Option<&Sort>) -> Result<Term, SyntaxError> {
        let t = self.lower_inner(s, expected)?;
        if let Some(exp) = expected {
            let found = t.sort();
            if &found != exp {
                let (line, col) = first_location(s);
                return Err(SyntaxError::Semantic {
                    line,
                    col,
                    msg: format!("expected a {exp} expression, found {found}"),
                });
            }
        }
        Ok(t)
    }

    fn lower_inner(&mut self, s: &Surf, expected: Option<&Sort>) -> Result<Term, SyntaxError> {
        let (line, col) = first_location(s);
        let err = |msg: String| SyntaxError::Semantic { line, col, msg };
        match s {
            Surf::Num(n) => Ok(Term::Int(n.clone())),
            Surf::Rat(r) => {
                if r.is_integer() {
                    Ok(Term::Int(r.to_integer()))
                } else {
                    Err(err(format!(
                        "fraction {r} is only allowed inside an (in)equality of an assertion"
                    )))
                }
            }
            Surf::Ident { name, .. } => {
                if name == "true" {
                    return Ok(Term::tt());
                }
                if name == "false" {
                    return Ok(Term::ff());
                }
                if let Some(f) = self.funs.get(name) {
                    if f.arity() == 0 {
                        return Ok(Term::App(f.clone(), Vec::new()));
                    }
                    return Err(err(format!("symbol {name} expects arguments")));
                }
                if name.starts_with(FRESH_PREFIX) {
                    return Err(err(format!("names starting with {FRESH_PREFIX} are reserved")));
                }
                let sort = match self.vars.get(name) {
                    Some(s) => s.clone(),
                    None if self.closed => return Err(err(format!("unknown variable {name}"))),
                    None => {
                        let s = expected.cloned().unwrap_or(Sort::Int);
                        self.vars.insert(name.clone(), s.clone());
                        s
                    }
                };
                Ok(Term::Var(Var::new(name, sort)))
            }
            Surf::Call { name, args, .. } => {
                if name == "exp" && !self.funs.contains_key(name) {
                    if args.len() != 2 {
                        return Err(err("exp takes two arguments".into()));
                    }
                    let a = self.lower(&args[0], Some(&Sort::Int))?;
                    let b = self.lower(&args[1], Some(&Sort::Int))?;
                    return Ok(Term::op(Op::Exp, vec![a, b]));
                }
                let f = self
                    .funs
                    .get(name)
                    .cloned()
                    .ok_or_else(|| err(format!("unknown function symbol {name}")))?;
                if f.arity() != args.len() {
                    return Err(err(format!(
                        "{name} expects {} arguments, got {}",
                        f.arity(),
                        args.len()
                    )));
                }
                let lowered = args
                    .iter()
                    .zip(f.arg_sorts())
                    .map(|(a, srt)| self.lower(a, Some(srt)))
                    .collect::<Result<Vec<_>, _>>()?;
                Term::app(&f, lowered).map_err(|e| err(e.to_string()))
            }
            Surf::Neg(a) => {
                let a = self.lower(a, Some(&Sort::Int))?;
                Ok(Term::op(Op::Sub, vec![Term::int(0), a]))
            }
            Surf::Not(a) => {
                let a = self.lower(a, Some(&Sort::Bool))?;
                Ok(Term::op(Op::Not, vec![a]))
            }
            Surf::Bin(op, a, b) => {
                if op.is_comparison() && (a.has_rational() || b.has_rational()) {
                    if !self.allow_rationals {
                        return Err(err("fractions are only allowed in assertions".into()));
                    }
                    let k = a.denominator().lcm(&b.denominator());
                    let a2 = scale(a, &k).map_err(err)?;
                    let b2 = scale(b, &k).map_err(err)?;
                    return self.lower_inner(&Surf::Bin(*op, Box::new(a2), Box::new(b2)), expected);
                }
                let int = Some(&Sort::Int);
                let boolean = Some(&Sort::Bool);
                let bin = |this: &mut Self, o: Op, x: &Surf, y: &Surf, srt: Option<&Sort>| {
                    let x = this.lower(x, srt)?;
                    let y = this.lower(y, srt)?;
                    Ok::<Term, SyntaxError>(Term::op(o, vec![x, y]))
                };
                match op {
                    BinOp::Add => bin(self, Op::Add, a, b, int),
                    BinOp::Sub => bin(self, Op::Sub, a, b, int),
                    BinOp::Mul => bin(self, Op::Mul, a, b, int),
                    BinOp::Slash | BinOp::Div => bin(self, Op::Div, a, b, int),
                    BinOp::Mod => bin(self, Op::Mod, a, b, int),
                    BinOp::Ge => bin(self, Op::Ge, a, b, int),
                    BinOp::Gt => bin(self, Op::Gt, a, b, int),
                    BinOp::Le => bin(self, Op::Ge, b, a, int),
                    BinOp::Lt => bin(self, Op::Gt, b, a, int),
                    BinOp::And => bin(self, Op::And, a, b, boolean),
                    BinOp::Or => bin(self, Op::Or, a, b, boolean),
                    BinOp::Implies => bin(self, Op::Implies, a, b, boolean),
                    BinOp::Eq | BinOp::Ne => {
                        let o = if *op == BinOp::Eq { Op::Eq } else { Op::Ne };
                        let x = self.lower(a, None)?;
                        let y = self.lower(b, Some(&x.sort()))?;
                        if !x.sort().is_theory() {
                            return Err(err(format!("cannot compare terms of sort {}", x.sort())));
                        }
                        Ok(Term::op(o, vec![x, y]))
                    }
                }
            }
        }
    }
}

/// Multiplies an integer-valued surface expression by `k` so that every
/// fraction inside it becomes an integer.
fn scale(e: &Surf, k: &BigInt) -> Result<Surf, String> {
    let den = e.denominator();
    if den.is_one() {
        return Ok(if k.is_one() {
            e.clone()
        } else {
            Surf::Bin(BinOp::Mul, Box::new(Surf::Num(k.clone())), Box::new(e.clone()))
        });
    }
    if !(k % &den).is_zero() {
        return Err(format!("cannot clear denominator {den}"));
    }
    match e {
        Surf::Rat(r) => {
            let v = r * BigRational::from_integer(k.clone());
            Ok(Surf::Num(v.to_integer()))
        }
        Surf::Neg(a) => Ok(Surf::Neg(Box::new(scale(a, k)?))),
        Surf::Bin(op @ (BinOp::Add | BinOp::Sub), a, b) => Ok(Surf::Bin(
            *op,
            Box::new(scale(a, k)?),
            Box::new(scale(b, k)?),
        )),
        Surf::Bin(BinOp::Mul, a, b) => {
            let db = b.denominator();
            let left = scale(a, &(k / &db))?;
            let right = scale(b, &db)?;
            Ok(simplify_unit(Surf::Bin(BinOp::Mul, Box::new(left), Box::new(right))))
        }
        _ => Err("fractions may only appear under +, - and *".into()),
    }
}

fn simplify_unit(e: Surf) -> Surf {
    match e {
        Surf::Bin(BinOp::Mul, a, b) => match (*a, *b) {
            (Surf::Num(n), other) | (other, Surf::Num(n)) if n.is_one() => other,
            (a, b) => Surf::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
        },
        other => other,
    }
}

fn first_location(s: &Surf) -> (usize, usize) {
    match s {
        Surf::Ident { line, col, .. } | Surf::Call { line, col, .. } => (*line, *col),
        Surf::Bin(_, a, b) => {
            let l = first_location(a);
            if l != (0, 0) {
                l
            } else {
                first_location(b)
            }
        }
        Surf::Neg(a) | Surf::Not(a) => first_location(a),
        _ => (0, 0),
    }
}

fn parse_whole(src: &str, lowering: &mut Lowering<'_>, sort: &Sort) -> Result<Term, SyntaxError> {
    let mut p = Parser::new(src)?;
    let e = p.parse_expr()?;
    if !p.at_eof() {
        return Err(p.unexpected("end of input"));
    }
    lowering.lower(&e, Some(sort))
}

/// Parses a boolean constraint over integer variables, clearing fractions.
pub fn parse_constraint(src: &str) -> Result<Term, SyntaxError> {
    let funs = BTreeMap::new();
    let mut l = Lowering::new(&funs);
    l.allow_rationals = true;
    parse_whole(src, &mut l, &Sort::Bool)
}

/// Parses an integer expression over integer variables.
pub fn parse_int_expr(src: &str) -> Result<Term, SyntaxError> {
    let funs = BTreeMap::new();
    let mut l = Lowering::new(&funs);
    parse_whole(src, &mut l, &Sort::Int)
}
