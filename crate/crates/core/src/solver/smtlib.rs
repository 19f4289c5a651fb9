//! SMT-LIB2 text protocol over a child process.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use num_bigint::BigInt;
use thiserror::Error;

use crate::terms::{Sort, Term, Var};
use crate::theory::{Op, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmtError {
    #[error("solver could not be started: {0}")]
    Unavailable(String),
    #[error("solver timed out")]
    Timeout,
    #[error("solver protocol error: {0}")]
    Protocol(String),
    #[error("constraint cannot be expressed: {0}")]
    Unsupported(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SmtAnswer {
    Sat(BTreeMap<String, Value>),
    Unsat,
    Unknown(String),
}

/// Quotes a symbol when it is not a plain SMT-LIB simple symbol.
fn symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{}|", name.replace('|', "_"))
    }
}

fn sort_name(s: &Sort) -> Result<&'static str, SmtError> {
    match s {
        Sort::Int => Ok("Int"),
        Sort::Bool => Ok("Bool"),
        other => Err(SmtError::Unsupported(format!("sort {other}"))),
    }
}

/// Renders a logical term as an SMT-LIB expression.
pub fn to_smt(t: &Term) -> Result<String, SmtError> {
    Ok(match t {
        Term::Var(v) => symbol(v.name()),
        Term::Int(n) if n.sign() == num_bigint::Sign::Minus => format!("(- {})", -n),
        Term::Int(n) => n.to_string(),
        Term::Bool(b) => b.to_string(),
        Term::App(f, _) => return Err(SmtError::Unsupported(format!("symbol {}", f.name()))),
        Term::Op(Op::Exp, a) => match &a[1] {
            Term::Int(k) if k.sign() != num_bigint::Sign::Minus && *k <= BigInt::from(64) => {
                let e: u32 = u32::try_from(k).expect("small");
                if e == 0 {
                    "1".to_string()
                } else {
                    let base = to_smt(&a[0])?;
                    let factors = vec![base; e as usize];
                    if e == 1 {
                        factors[0].clone()
                    } else {
                        format!("(* {})", factors.join(" "))
                    }
                }
            }
            _ => return Err(SmtError::Unsupported("exp with a symbolic exponent".into())),
        },
        // Division and modulus by zero are total and yield zero.
        Term::Op(op @ (Op::Div | Op::Mod), a) => {
            let (x, y) = (to_smt(&a[0])?, to_smt(&a[1])?);
            let f = if *op == Op::Div { "div" } else { "mod" };
            format!("(ite (= {y} 0) 0 ({f} {x} {y}))")
        }
        Term::Op(op, a) => {
            let name = match op {
                Op::Add => "+",
                Op::Sub => "-",
                Op::Mul => "*",
                Op::Ge => ">=",
                Op::Gt => ">",
                Op::Eq => "=",
                Op::Ne => "distinct",
                Op::And => "and",
                Op::Or => "or",
                Op::Implies => "=>",
                Op::Not => "not",
                Op::Div | Op::Mod | Op::Exp => unreachable!("handled above"),
            };
            let args = a.iter().map(to_smt).collect::<Result<Vec<_>, _>>()?;
            format!("({} {})", name, args.join(" "))
        }
    })
}

/// The full script for one satisfiability query.
pub fn script(phi: &Term, timeout: Duration) -> Result<String, SmtError> {
    let mut out = String::new();
    out.push_str("(reset)\n(set-option :produce-models true)\n");
    out.push_str(&format!("(set-option :timeout {})\n", timeout.as_millis()));
    out.push_str("(set-logic NIA)\n");
    for v in phi.vars() {
        out.push_str(&format!(
            "(declare-const {} {})\n",
            symbol(v.name()),
            sort_name(v.sort())?
        ));
    }
    out.push_str(&format!("(assert {})\n(check-sat)\n", to_smt(phi)?));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

/// Parses one s-expression, returning it with the unconsumed rest.
pub fn parse_sexp(src: &str) -> Result<(Sexp, &str), SmtError> {
    let s = src.trim_start();
    if let Some(rest) = s.strip_prefix('(') {
        let mut items = Vec::new();
        let mut rest = rest;
        loop {
            let r = rest.trim_start();
            if let Some(after) = r.strip_prefix(')') {
                return Ok((Sexp::List(items), after));
            }
            if r.is_empty() {
                return Err(SmtError::Protocol("unbalanced parentheses".into()));
            }
            let (item, after) = parse_sexp(r)?;
            items.push(item);
            rest = after;
        }
    } else if let Some(rest) = s.strip_prefix('|') {
        let end = rest
            .find('|')
            .ok_or_else(|| SmtError::Protocol("unterminated quoted symbol".into()))?;
        Ok((Sexp::Atom(rest[..end].to_string()), &rest[end + 1..]))
    } else {
        let end = s
            .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
            .unwrap_or(s.len());
        if end == 0 {
            return Err(SmtError::Protocol(format!("unexpected input {s:?}")));
        }
        Ok((Sexp::Atom(s[..end].to_string()), &s[end..]))
    }
}

fn sexp_value(e: &Sexp) -> Option<Value> {
    match e {
        Sexp::Atom(a) if a == "true" => Some(Value::Bool(true)),
        Sexp::Atom(a) if a == "false" => Some(Value::Bool(false)),
        Sexp::Atom(a) => a.parse::<BigInt>().ok().map(Value::Int),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(m), x] if m == "-" => match sexp_value(x)? {
                Value::Int(n) => Some(Value::Int(-n)),
                Value::Bool(_) => None,
            },
            _ => None,
        },
    }
}

/// Reads `(define-fun x () Int v)` entries from a model response.
pub fn parse_model(text: &str) -> Result<BTreeMap<String, Value>, SmtError> {
    let (e, _) = parse_sexp(text)?;
    let Sexp::List(items) = e else {
        return Err(SmtError::Protocol("model is not a list".into()));
    };
    let mut out = BTreeMap::new();
    for it in items {
        if let Sexp::List(parts) = it {
            if let [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(params), _sort, body] =
                parts.as_slice()
            {
                if kw == "define-fun" && params.is_empty() {
                    let v = sexp_value(body).ok_or_else(|| {
                        SmtError::Protocol(format!("unsupported model value for {name}"))
                    })?;
                    out.insert(name.clone(), v);
                }
            }
        }
    }
    Ok(out)
}

/// A running solver process.
pub struct SmtSession {
    command: Vec<String>,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl SmtSession {
    pub fn start(command: &[String]) -> Result<SmtSession, SmtError> {
        let (prog, args) = command
            .split_first()
            .ok_or_else(|| SmtError::Unavailable("empty solver command".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SmtError::Unavailable(format!("{prog}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(SmtSession {
            command: command.to_vec(),
            child,
            stdin,
            lines: rx,
        })
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }

    fn send(&mut self, text: &str) -> Result<(), SmtError> {
        self.stdin
            .write_all(text.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| SmtError::Unavailable(e.to_string()))
    }

    fn recv(&mut self, deadline: Duration) -> Result<String, SmtError> {
        match self.lines.recv_timeout(deadline) {
            Ok(l) => Ok(l),
            Err(RecvTimeoutError::Timeout) => Err(SmtError::Timeout),
            Err(RecvTimeoutError::Disconnected) => {
                Err(SmtError::Unavailable("solver exited".into()))
            }
        }
    }

    /// Reads one balanced s-expression, possibly spanning several lines.
    fn recv_sexp(&mut self, deadline: Duration) -> Result<String, SmtError> {
        let mut buf = String::new();
        let mut depth: i64 = 0;
        loop {
            let line = self.recv(deadline)?;
            for c in line.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
            }
            buf.push_str(&line);
            buf.push('\n');
            if depth <= 0 && !buf.trim().is_empty() {
                return Ok(buf);
            }
        }
    }

    /// Runs one satisfiability query.
    pub fn check_sat(&mut self, phi: &Term, timeout: Duration) -> Result<SmtAnswer, SmtError> {
        let text = script(phi, timeout)?;
        self.send(&text)?;
        let grace = timeout + Duration::from_secs(2);
        let answer = loop {
            let line = self.recv(grace)?;
            let l = line.trim();
            if l.is_empty() || l == "success" {
                continue;
            }
            break l.to_string();
        };
        match answer.as_str() {
            "unsat" => Ok(SmtAnswer::Unsat),
            "unknown" => Ok(SmtAnswer::Unknown("solver answered unknown".into())),
            "sat" => {
                self.send("(get-model)\n")?;
                let model = self.recv_sexp(grace)?;
                Ok(SmtAnswer::Sat(parse_model(&model)?))
            }
            other if other.starts_with("(error") => Err(SmtError::Protocol(other.to_string())),
            other => Err(SmtError::Protocol(format!("unexpected reply {other:?}"))),
        }
    }
}

impl Drop for SmtSession {
    fn drop(&mut self) {
        let _ = self.send("(exit)\n");
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Maps a name-keyed model back onto the variables of `phi`, filling gaps.
pub fn model_for(phi: &Term, raw: &BTreeMap<String, Value>) -> BTreeMap<Var, Value> {
    phi.vars()
        .into_iter()
        .map(|v| {
            let val = raw.get(v.name()).cloned().unwrap_or(match v.sort() {
                Sort::Bool => Value::Bool(false),
                _ => Value::Int(BigInt::from(0)),
            });
            (v, val)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_constraint;

    #[test]
    fn rendering() {
        let t = parse_constraint("2 * z = i * (i + 1) && !(x > -3)").unwrap();
        assert_eq!(
            to_smt(&t).unwrap(),
            "(and (= (* 2 z) (* i (+ i 1))) (not (> x (- 3))))"
        );
        assert_eq!(symbol("x'"), "|x'|");
        let s = script(&t, Duration::from_secs(1)).unwrap();
        assert!(s.contains("(set-logic NIA)"));
        assert!(s.contains("(declare-const z Int)"));
    }

    #[test]
    fn model_parsing() {
        let m = parse_model("(\n  (define-fun x () Int\n    (- 2))\n  (define-fun b () Bool true)\n)").unwrap();
        assert_eq!(m["x"], Value::Int((-2).into()));
        assert_eq!(m["b"], Value::Bool(true));
        let m = parse_model("(model (define-fun |x'| () Int 7))").unwrap();
        assert_eq!(m["x'"], Value::Int(7.into()));
    }
}
