//! Line-oriented text format for rule sets.
//!
//! ```text
//! sort state
//! state3 : int int int -> state
//! end : int int int -> state
//! rules
//! l3+: state3(x,i,z) -> state4(x,i,z) [x > i]
//! ```
//!
//! `#` starts a comment. The `id:` prefix of a rule is optional; unnamed
//! rules are numbered `r1`, `r2`, ... in file order.

use std::fmt::Write as _;

use thiserror::Error;

use super::{ConstrainedRule, Lctrs, Origin, RuleError};
use crate::syntax::{Lowering, Parser, SyntaxError, Tok};
use crate::terms::{FunSym, Sort, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("line {line}: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Syntax { line: usize, source: SyntaxError },
    #[error("line {line}: {source}")]
    Rule { line: usize, source: RuleError },
}

impl TextError {
    pub fn line(&self) -> usize {
        match self {
            TextError::Header { line, .. } | TextError::Syntax { line, .. } | TextError::Rule { line, .. } => *line,
        }
    }
}

fn parse_sort(name: &str) -> Sort {
    match name {
        "int" => Sort::Int,
        "bool" => Sort::Bool,
        other => Sort::named(other),
    }
}

/// The origin recorded for a rule, recovered from its id.
pub fn origin_from_id(id: &str) -> Origin {
    if id == "chk+" || id == "chk-" {
        return Origin::Check;
    }
    if let Some(label) = id.strip_prefix("hyp:") {
        return Origin::Hypothesis { label: label.to_string() };
    }
    if let Some(rest) = id.strip_prefix('l') {
        let digits = rest.trim_end_matches(['+', '-']);
        if let Ok(line) = digits.parse::<usize>() {
            if rest.len() - digits.len() <= 1 {
                return Origin::ProgramLine { line };
            }
        }
    }
    Origin::Input
}

/// Splits `id: body` when the part before the first `(` holds `": "`.
fn split_id(line: &str) -> (Option<&str>, &str) {
    let head_end = line.find('(').unwrap_or(line.len());
    match line[..head_end].rfind(": ") {
        Some(k) => (Some(line[..k].trim()), &line[k + 2..]),
        None => (None, line),
    }
}

fn parse_rule_body(r: &Lctrs, body: &str) -> Result<(Term, Term, Term), SyntaxError> {
    let mut p = Parser::new(body)?;
    let lhs_s = p.parse_expr()?;
    p.expect(&Tok::Arrow)?;
    let rhs_s = p.parse_expr()?;
    let guard_s = if p.eat(&Tok::LBracket) {
        let g = p.parse_expr()?;
        p.expect(&Tok::RBracket)?;
        Some(g)
    } else {
        None
    };
    if !p.at_eof() {
        return Err(p.unexpected("end of rule"));
    }
    let mut low = Lowering::new(r.funs());
    let lhs = low.lower(&lhs_s, None)?;
    let rhs = low.lower(&rhs_s, Some(&lhs.sort()))?;
    let guard = match guard_s {
        Some(g) => low.lower(&g, Some(&Sort::Bool))?,
        None => Term::tt(),
    };
    Ok((lhs, rhs, guard))
}

pub fn parse_lctrs(src: &str) -> Result<Lctrs, TextError> {
    let mut r = Lctrs::new();
    let mut in_rules = false;
    let mut unnamed = 0usize;
    for (k, raw) in src.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "rules" {
            in_rules = true;
            continue;
        }
        if !in_rules {
            if let Some(rest) = line.strip_prefix("sort ") {
                for name in rest.split_whitespace() {
                    r.declare_sort(parse_sort(name));
                }
                continue;
            }
            let bad = |msg: &str| TextError::Header {
                line: line_no,
                msg: msg.to_string(),
            };
            let (name, sig) = line
                .split_once(':')
                .ok_or_else(|| bad("expected 'sort ...', a declaration 'f : s1 ... -> s' or 'rules'"))?;
            let (args, res) = sig.split_once("->").ok_or_else(|| bad("declaration without '->'"))?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(bad("invalid function name"));
            }
            let res = res.trim();
            if res.is_empty() || res.contains(char::is_whitespace) {
                return Err(bad("a declaration has exactly one result sort"));
            }
            let args = args.split_whitespace().map(parse_sort).collect();
            r.declare_fun(FunSym::new(name, args, parse_sort(res)));
            continue;
        }
        let (id, body) = split_id(line);
        let id = match id {
            Some(id) => id.to_string(),
            None => {
                unnamed += 1;
                format!("r{unnamed}")
            }
        };
        let (lhs, rhs, guard) =
            parse_rule_body(&r, body).map_err(|source| TextError::Syntax { line: line_no, source })?;
        let origin = origin_from_id(&id);
        let rule = ConstrainedRule::new(&id, lhs, rhs, guard, origin)
            .map_err(|source| TextError::Rule { line: line_no, source })?;
        r.add_rule(rule).map_err(|source| TextError::Rule { line: line_no, source })?;
    }
    Ok(r)
}

/// A term over the signature of `r`, e.g. `fact(3)`.
pub fn parse_term(r: &Lctrs, src: &str) -> Result<Term, SyntaxError> {
    let mut p = Parser::new(src)?;
    let s = p.parse_expr()?;
    if !p.at_eof() {
        return Err(p.unexpected("end of term"));
    }
    Lowering::new(r.funs()).lower(&s, None)
}

/// Prints the header and one `id: rule` line per rule.
pub fn print_lctrs(r: &Lctrs) -> String {
    let mut out = String::new();
    if !r.sorts().is_empty() {
        let names: Vec<String> = r.sorts().iter().map(|s| s.to_string()).collect();
        writeln!(out, "sort {}", names.join(" ")).expect("string write");
    }
    for f in r.funs().values() {
        let args: Vec<String> = f.arg_sorts().iter().map(|s| s.to_string()).collect();
        let sep = if args.is_empty() { "" } else { " " };
        writeln!(out, "{} : {}{sep}-> {}", f.name(), args.join(" "), f.result_sort()).expect("string write");
    }
    out.push_str("rules\n");
    for rule in r.rules() {
        writeln!(out, "{}: {rule}", rule.id()).expect("string write");
    }
    out
}

/// Just the rule lines, without the header.
pub fn print_rules(r: &Lctrs) -> String {
    r.rules().iter().map(|rule| format!("{}: {rule}\n", rule.id())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUM: &str = "\
sort state
state3 : int int int -> state
state4 : int int int -> state
end : int int int -> state
rules
l3+: state3(x,i,z) -> state4(x,i,z) [x > i]
l3-: state3(x,i,z) -> end(x,i,z) [!(x > i)]
l4: state4(x,i,z) -> state3(x,i + 1,z + i + 1)
";

    #[test]
    fn roundtrip_is_exact() {
        let r = parse_lctrs(SUM).unwrap();
        assert_eq!(r.rules().len(), 3);
        let printed = print_lctrs(&r);
        let again = parse_lctrs(&printed).unwrap();
        assert_eq!(again, r);
        assert_eq!(print_lctrs(&again), printed);
    }

    #[test]
    fn origins_follow_ids() {
        assert_eq!(origin_from_id("l12+"), Origin::ProgramLine { line: 12 });
        assert_eq!(origin_from_id("chk-"), Origin::Check);
        assert_eq!(origin_from_id("hyp:goal"), Origin::Hypothesis { label: "goal".into() });
        assert_eq!(origin_from_id("len"), Origin::Input);
    }

    #[test]
    fn unnamed_rules_and_comments() {
        let src = "f : int -> int\nrules\n# factorial\nf(x) -> 1 [0 >= x]\nf(x) -> x * f(x - 1) [x > 0]\n";
        let r = parse_lctrs(src).unwrap();
        assert_eq!(r.rules()[1].id(), "r2");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_lctrs("f : int -> int\nrules\nf(x) -> g(x)\n").unwrap_err();
        assert_eq!(err.line(), 3);
        let err = parse_lctrs("f int\n").unwrap_err();
        assert_eq!(err.line(), 1);
        let err = parse_lctrs("f : int -> int\nrules\nf(x) -> true\n").unwrap_err();
        assert!(matches!(err, TextError::Syntax { .. } | TextError::Rule { .. }));
    }
}
