//! Random programs and tableaux for the integration tests.
#![allow(dead_code)]

use hoare2ri::solver::{Solver, SolverConfig};
use hoare2ri::terms::{Substitution, Term, Var};
use hoare2ri::theory::build::{add, and, eq, ge, gt, int, mul, ne, not, or, sub, var};
use hoare2ri::theory::Op;
use hoare2ri::whilelang::{parse_program, WhileAst};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VARS: [&str; 3] = ["x", "y", "z"];

pub fn fixture_path(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture_src(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn fixture(name: &str) -> WhileAst {
    parse_program(&fixture_src(name)).unwrap()
}

/// The external solver when one is configured, the builtin stages otherwise.
pub fn solver() -> Solver {
    Solver::new(SolverConfig::resolve(None, None))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Statements of the generated programs.
#[derive(Clone, Debug)]
pub enum Stmt {
    Assign(&'static str, Term),
    Skip,
    If(Term, Vec<Stmt>, Vec<Stmt>),
    While(Term, Vec<Stmt>),
}

pub fn expr(r: &mut ChaCha8Rng, depth: usize) -> Term {
    let leaf = |r: &mut ChaCha8Rng| {
        if r.gen_bool(0.6) {
            var(VARS.choose(r).unwrap())
        } else {
            int(r.gen_range(-3..=3))
        }
    };
    if depth == 0 || r.gen_bool(0.4) {
        return leaf(r);
    }
    match r.gen_range(0..3) {
        0 => add(expr(r, depth - 1), expr(r, depth - 1)),
        1 => sub(expr(r, depth - 1), expr(r, depth - 1)),
        _ => mul(int(r.gen_range(-2..=3)), leaf(r)),
    }
}

pub fn cond(r: &mut ChaCha8Rng) -> Term {
    let (a, b) = (expr(r, 1), expr(r, 1));
    let c = match r.gen_range(0..4) {
        0 => ge(a, b),
        1 => gt(a, b),
        2 => eq(a, b),
        _ => ne(a, b),
    };
    if r.gen_bool(0.2) {
        not(c)
    } else {
        c
    }
}

/// A block of 1..=3 statements. `loops` is the remaining loop budget.
pub fn block(r: &mut ChaCha8Rng, depth: usize, loops: &mut usize, loop_free: bool) -> Vec<Stmt> {
    let n = r.gen_range(1..=3);
    (0..n).map(|_| stmt(r, depth, loops, loop_free)).collect()
}

fn stmt(r: &mut ChaCha8Rng, depth: usize, loops: &mut usize, loop_free: bool) -> Stmt {
    let k = r.gen_range(0..10);
    if depth < 3 && k == 0 && *loops > 0 && !loop_free {
        *loops -= 1;
        return Stmt::While(cond(r), block(r, depth + 1, loops, loop_free));
    }
    if depth < 3 && k <= 2 {
        return Stmt::If(cond(r), block(r, depth + 1, loops, loop_free), block(r, depth + 1, loops, loop_free));
    }
    if k == 3 {
        return Stmt::Skip;
    }
    Stmt::Assign(VARS.choose(r).unwrap(), expr(r, 2))
}

/// Nesting depth at most 3 and at most two loops.
pub fn random_program(seed: u64) -> Vec<Stmt> {
    let mut r = rng(seed);
    let mut loops = 2;
    block(&mut r, 0, &mut loops, false)
}

pub fn render(stmts: &[Stmt]) -> String {
    let mut out = String::new();
    render_into(stmts, 0, &mut out);
    out
}

fn render_into(stmts: &[Stmt], indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    for s in stmts {
        match s {
            Stmt::Assign(v, e) => out.push_str(&format!("{pad}{v} := {e};\n")),
            Stmt::Skip => out.push_str(&format!("{pad}skip;\n")),
            Stmt::If(c, a, b) => {
                out.push_str(&format!("{pad}if ({c}) {{\n"));
                render_into(a, indent + 1, out);
                out.push_str(&format!("{pad}}} else {{\n"));
                render_into(b, indent + 1, out);
                out.push_str(&format!("{pad}}}\n"));
            }
            Stmt::While(c, body) => {
                out.push_str(&format!("{pad}while ({c}) {{\n"));
                render_into(body, indent + 1, out);
                out.push_str(&format!("{pad}}}\n"));
            }
        }
    }
}

fn subst(t: &Term, v: &str, e: &Term) -> Term {
    t.apply(&Substitution::from_pairs([(Var::int(v), e.clone())]).unwrap())
}

/// Tableau lines for loop-free `stmts` ending in `@ post;`, with the
/// weakest precondition as the first assertion.
pub fn wp_tableau(stmts: &[Stmt], post: &Term) -> (Vec<String>, Term) {
    let mut lines = vec![format!("@ {post};")];
    let mut cur = post.clone();
    for s in stmts.iter().rev() {
        let (mut head, pre) = stmt_tableau(s, &cur);
        head.append(&mut lines);
        lines = head;
        cur = pre;
    }
    (lines, cur)
}

fn stmt_tableau(s: &Stmt, post: &Term) -> (Vec<String>, Term) {
    match s {
        Stmt::Assign(v, e) => {
            let pre = subst(post, v, e);
            (vec![format!("@ {pre};"), format!("{v} := {e};")], pre)
        }
        Stmt::Skip => (vec![format!("@ {post};"), "skip;".into()], post.clone()),
        Stmt::If(c, a, b) => {
            let (la, pa) = wp_tableau(a, post);
            let (lb, pb) = wp_tableau(b, post);
            let pre = and(or(not(c.clone()), pa), or(c.clone(), pb));
            let mut lines = vec![format!("@ {pre};"), format!("if ({c}) {{")];
            lines.push(format!("@ {};", Term::op(Op::And, vec![pre.clone(), c.clone()])));
            lines.extend(la);
            lines.push("} else {".into());
            lines.push(format!("@ {};", Term::op(Op::And, vec![pre.clone(), not(c.clone())])));
            lines.extend(lb);
            lines.push("}".into());
            (lines, pre)
        }
        Stmt::While(..) => panic!("wp_tableau takes loop-free statements"),
    }
}

/// A valid loop-free tableau for a random program and post-condition.
pub fn random_loop_free_tableau(seed: u64) -> String {
    let mut r = rng(seed);
    let mut none = 0;
    let stmts = block(&mut r, 1, &mut none, true);
    let post = cond(&mut r);
    let (lines, _) = wp_tableau(&stmts, &post);
    lines.join("\n") + "\n"
}

/// A valid tableau with a loop: `k` counts down to zero around a random
/// loop-free body, then `x`, `y`, `z` are reset to constants and a random
/// suffix runs. The post-condition is chosen to hold on the final state,
/// so the only assertion after the loop that is not a weakest
/// precondition is a ground truth implied by the exit condition.
pub fn random_loop_tableau(seed: u64) -> String {
    let mut r = rng(seed);
    let mut none = 0;
    let k = var("k");
    let inv = ge(k.clone(), int(0));
    let guard = gt(k.clone(), int(0));

    let mut body = block(&mut r, 2, &mut none, true);
    body.push(Stmt::Assign("k", sub(k.clone(), int(1))));
    let (body_lines, _) = wp_tableau(&body, &inv);

    let mut after: Vec<Stmt> = VARS.iter().map(|v| Stmt::Assign(v, int(r.gen_range(-2..=2)))).collect();
    after.extend(block(&mut r, 2, &mut none, true));
    let mut post = cond(&mut r);
    let mut after_lines = wp_tableau(&after, &post).0;
    let holds = |lines: &[String]| {
        let first = lines[0].trim_start_matches('@').trim_end_matches(';');
        hoare2ri::syntax::parse_constraint(first)
            .ok()
            .and_then(|t| hoare2ri::theory::eval_ground(&t).ok())
            .and_then(|v| v.as_bool())
    };
    if holds(&after_lines) != Some(true) {
        post = not(post);
        after_lines = wp_tableau(&after, &post).0;
    }

    let start = Stmt::Assign("k", int(r.gen_range(0..=3)));
    let (start_lines, _) = wp_tableau(&[start], &inv);
    let mut lines = start_lines;
    lines.push(format!("while @ {inv} ({guard}) {{"));
    lines.push(format!("@ {};", Term::op(Op::And, vec![inv.clone(), guard.clone()])));
    lines.extend(body_lines);
    lines.push("}".into());
    lines.push(format!("@ {};", Term::op(Op::And, vec![inv, not(guard)])));
    lines.extend(after_lines);
    lines.join("\n") + "\n"
}
