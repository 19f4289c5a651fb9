//! Statement-level parser. Every statement occupies one numbered line;
//! the final blank line is added automatically.

use std::collections::BTreeMap;

use super::{Command, Line, WhileAst};
use crate::syntax::{Lowering, Parser, Surf, SyntaxError, Tok};
use crate::terms::{Sort, Term, Var};

const KEYWORDS: &[&str] = &["if", "else", "while", "skip", "true", "false", "div", "mod"];

struct StmtParser<'a> {
    p: Parser,
    low: Lowering<'a>,
}

impl StmtParser<'_> {
    fn lower(&mut self, s: &Surf, sort: Sort, assertion: bool) -> Result<Term, SyntaxError> {
        self.low.allow_rationals = assertion;
        self.low.lower(s, Some(&sort))
    }

    fn expr(&mut self, sort: Sort, assertion: bool) -> Result<Term, SyntaxError> {
        self.p.set_fractions(assertion);
        let s = self.p.parse_expr()?;
        self.lower(&s, sort, assertion)
    }

    fn at_ident(&self, kw: &str) -> bool {
        matches!(&self.p.peek().tok, Tok::Ident(s) if s == kw)
    }

    /// `@rank e` rather than an assertion on a variable called `rank`.
    fn at_rank(&self) -> bool {
        if !self.p.at(&Tok::At) {
            return false;
        }
        let is_rank = matches!(&self.p.peek_at(1).tok, Tok::Ident(s) if s == "rank");
        let operator_follows = matches!(
            self.p.peek_at(2).tok,
            Tok::Ge
                | Tok::Gt
                | Tok::Le
                | Tok::Lt
                | Tok::Eq
                | Tok::Ne
                | Tok::And
                | Tok::Or
                | Tok::Implies
                | Tok::Plus
                | Tok::Minus
                | Tok::Star
                | Tok::Slash
                | Tok::Semi
                | Tok::RParen
        );
        is_rank && !operator_follows
    }

    fn end_simple(&mut self) -> Result<(), SyntaxError> {
        self.p.expect(&Tok::Semi).map(|_| ())
    }
}

/// Parses an annotated while program.
pub fn parse_program(src: &str) -> Result<WhileAst, SyntaxError> {
    let funs = BTreeMap::new();
    let mut sp = StmtParser {
        p: Parser::new(src)?.without_calls(),
        low: Lowering::new(&funs),
    };
    let mut lines: Vec<Line> = Vec::new();
    // (is_if, else seen, source line of the opener)
    let mut stack: Vec<(bool, bool, usize)> = Vec::new();
    loop {
        let tok = sp.p.peek().clone();
        let src_line = tok.line;
        let command = match &tok.tok {
            Tok::Eof => break,
            Tok::At => {
                sp.p.advance();
                let cond = sp.expr(Sort::Bool, true)?;
                sp.end_simple()?;
                Command::Assert { cond }
            }
            Tok::RBrace => {
                sp.p.advance();
                if sp.at_ident("else") {
                    sp.p.advance();
                    match stack.last_mut() {
                        Some((true, seen @ false, _)) => *seen = true,
                        _ => {
                            return Err(SyntaxError::Semantic {
                                line: tok.line,
                                col: tok.col,
                                msg: "else without a matching if".into(),
                            })
                        }
                    }
                    sp.p.expect(&Tok::LBrace)?;
                    Command::ElseOpen
                } else {
                    match stack.pop() {
                        None => {
                            return Err(SyntaxError::Unmatched {
                                line: tok.line,
                                what: "'}'".into(),
                            })
                        }
                        Some((true, false, _)) => {
                            return Err(SyntaxError::Semantic {
                                line: tok.line,
                                col: tok.col,
                                msg: "if statement without else branch".into(),
                            })
                        }
                        Some(_) => {}
                    }
                    sp.p.eat(&Tok::Semi);
                    Command::Close
                }
            }
            Tok::Ident(kw) if kw == "skip" => {
                sp.p.advance();
                sp.end_simple()?;
                Command::Skip
            }
            Tok::Ident(kw) if kw == "if" => {
                sp.p.advance();
                sp.p.expect(&Tok::LParen)?;
                let cond = sp.expr(Sort::Bool, false)?;
                sp.p.expect(&Tok::RParen)?;
                sp.p.expect(&Tok::LBrace)?;
                stack.push((true, false, tok.line));
                Command::IfOpen { cond }
            }
            Tok::Ident(kw) if kw == "while" => {
                sp.p.advance();
                let mut invariant = None;
                let mut rank = None;
                if sp.p.at(&Tok::At) && !sp.at_rank() {
                    sp.p.advance();
                    invariant = Some(sp.expr(Sort::Bool, true)?);
                }
                if sp.at_rank() {
                    sp.p.advance();
                    sp.p.advance();
                    rank = Some(sp.expr(Sort::Int, false)?);
                }
                sp.p.expect(&Tok::LParen)?;
                let guard = sp.expr(Sort::Bool, false)?;
                sp.p.expect(&Tok::RParen)?;
                sp.p.expect(&Tok::LBrace)?;
                stack.push((false, false, tok.line));
                Command::WhileOpen { invariant, guard, rank }
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                sp.p.advance();
                sp.p.expect(&Tok::Assign)?;
                let lhs = Surf::Ident {
                    name: name.clone(),
                    line: tok.line,
                    col: tok.col,
                };
                let var = match sp.lower(&lhs, Sort::Int, false)? {
                    Term::Var(v) => v,
                    _ => {
                        return Err(SyntaxError::Semantic {
                            line: tok.line,
                            col: tok.col,
                            msg: format!("cannot assign to {name}"),
                        })
                    }
                };
                let expr = sp.expr(Sort::Int, false)?;
                sp.end_simple()?;
                Command::Assign { var, expr }
            }
            _ => return Err(sp.p.unexpected("a statement")),
        };
        lines.push(Line {
            number: lines.len() + 1,
            command,
            src_line,
        });
    }
    if let Some((_, _, line)) = stack.pop() {
        return Err(SyntaxError::Unmatched {
            line,
            what: "'{'".into(),
        });
    }
    let end_src = sp.p.peek().line;
    lines.push(Line {
        number: lines.len() + 1,
        command: Command::Blank,
        src_line: end_src,
    });
    Ok(WhileAst::new(lines, None).expect("bracketing checked while parsing"))
}

/// Parses a program and orders its variables as given.
pub fn parse_program_with_vars(src: &str, vars: &[&str]) -> Result<WhileAst, SyntaxError> {
    let ast = parse_program(src)?;
    let order: Vec<Var> = vars.iter().map(|v| Var::int(v)).collect();
    ast.with_vars(order).ok_or_else(|| SyntaxError::Semantic {
        line: 1,
        col: 1,
        msg: "the variable list does not match the program's variables".into(),
    })
}
