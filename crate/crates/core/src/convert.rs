//! Compilation of while programs into state-transition rewrite systems,
//! plus the check rules and goal equation for a Hoare triple.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use serde::Serialize;
use thiserror::Error;

use crate::lctrs::{innermost_step, ConstrainedRule, Lctrs, Origin, RuleError};
use crate::ri::ConstrainedEquation;
use crate::terms::{FunSym, Sort, Substitution, Term, Var};
use crate::theory::build;
use crate::whilelang::{Block, Command, Valuation, WhileAst};

/// Name of the symbol for the final program point.
pub const END: &str = "end";
/// Name of the unary check symbol `chk : state -> bool`.
pub const CHK: &str = "chk";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConvertError {
    #[error("line {line}: assignment to {var}, which is not a program variable")]
    UnknownVariable { line: usize, var: String },
    #[error("the post-condition mentions {0}, which is not a program variable")]
    PostVariable(String),
    #[error("line {line}: malformed block structure")]
    Structure { line: usize },
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// How program lines relate to state symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConversionMap {
    #[serde(serialize_with = "ser_vars")]
    vars: Vec<Var>,
    #[serde(serialize_with = "ser_syms")]
    states: BTreeMap<usize, Arc<FunSym>>,
    successor: BTreeMap<usize, usize>,
    start: usize,
    end: usize,
    #[serde(skip)]
    chk: Arc<FunSym>,
}

fn ser_vars<S: serde::Serializer>(vs: &[Var], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(vs.iter().map(|v| v.name()))
}

fn ser_syms<S: serde::Serializer>(m: &BTreeMap<usize, Arc<FunSym>>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(m.iter().map(|(k, f)| (k, f.name())))
}

impl ConversionMap {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Command lines paired with their state symbols, `end` included.
    pub fn states(&self) -> &BTreeMap<usize, Arc<FunSym>> {
        &self.states
    }

    pub fn symbol(&self, line: usize) -> Option<&Arc<FunSym>> {
        self.states.get(&line)
    }

    /// The command line a state symbol stands for.
    pub fn line_of(&self, name: &str) -> Option<usize> {
        self.states.iter().find(|(_, f)| f.name() == name).map(|(l, _)| *l)
    }

    /// Next command line in textual order, skipping assertions.
    pub fn successor(&self, line: usize) -> Option<usize> {
        self.successor.get(&line).copied()
    }

    pub fn start_line(&self) -> usize {
        self.start
    }

    pub fn end_line(&self) -> usize {
        self.end
    }

    pub fn start_symbol(&self) -> &Arc<FunSym> {
        &self.states[&self.start]
    }

    pub fn end_symbol(&self) -> &Arc<FunSym> {
        &self.states[&self.end]
    }

    pub fn chk(&self) -> &Arc<FunSym> {
        &self.chk
    }

    /// `state_line(args)`.
    pub fn state(&self, line: usize, args: Vec<Term>) -> Option<Term> {
        Term::app(self.symbol(line)?, args).ok()
    }

    /// `state_line(x⃗)` over the program variables.
    pub fn state_at(&self, line: usize) -> Option<Term> {
        self.state(line, self.var_terms())
    }

    pub fn var_terms(&self) -> Vec<Term> {
        self.vars.iter().cloned().map(Term::Var).collect()
    }

    /// `chk(t)`.
    pub fn check(&self, t: Term) -> Term {
        Term::app(&self.chk, vec![t]).expect("chk takes a state")
    }

    /// `state(v⃗)` for a valuation of the program variables.
    pub fn ground_state(&self, line: usize, theta: &Valuation) -> Option<Term> {
        let vals = theta.values_in(&self.vars)?;
        self.state(line, vals.into_iter().map(Term::int).collect())
    }

    /// Reads a valuation back from `f(v⃗)` with integer values.
    pub fn valuation_of(&self, t: &Term) -> Option<(usize, Valuation)> {
        let Term::App(f, args) = t else {
            return None;
        };
        let line = self.line_of(f.name())?;
        let mut theta = Valuation::new();
        for (v, a) in self.vars.iter().zip(args) {
            let Term::Int(n) = a else {
                return None;
            };
            theta.set(v.clone(), n.clone());
        }
        Some((line, theta))
    }
}

fn state_symbol(name: &str, arity: usize) -> Arc<FunSym> {
    FunSym::new(name, vec![Sort::Int; arity], Sort::state())
}

/// Compiles `ast` into its rewrite system. Line numbers of assertions are
/// skipped, so a tableau and its stripped program give the same rules.
pub fn convert(ast: &WhileAst) -> Result<(Lctrs, ConversionMap), ConvertError> {
    let vars = ast.vars().to_vec();
    let n = vars.len();
    let end = ast.end_line();
    let mut states = BTreeMap::new();
    let mut successor = BTreeMap::new();
    for line in ast.lines().iter().filter(|l| !l.command.is_assert()) {
        let name = if line.number == end {
            END.to_string()
        } else {
            format!("state{}", line.number)
        };
        states.insert(line.number, state_symbol(&name, n));
        if let Some(next) = ast.next_command(line.number) {
            successor.insert(line.number, next);
        }
    }
    let cmap = ConversionMap {
        vars,
        states,
        successor,
        start: ast.first_command(),
        end,
        chk: FunSym::new(CHK, vec![Sort::state()], Sort::Bool),
    };

    let mut r = Lctrs::new();
    r.declare_sort(Sort::state());
    for f in cmap.states.values() {
        r.declare_fun(f.clone());
    }
    let xs = cmap.var_terms();
    let here = |l: usize| cmap.state_at(l).expect("command line");
    let next = |l: usize| cmap.successor(l).ok_or(ConvertError::Structure { line: l });
    let add = |r: &mut Lctrs, id: String, line: usize, rhs: Term, guard: Term| -> Result<(), ConvertError> {
        let rule = ConstrainedRule::new(id, here(line), rhs, guard, Origin::ProgramLine { line })?;
        r.add_rule(rule)?;
        Ok(())
    };
    for line in ast.lines() {
        let i = line.number;
        match &line.command {
            Command::Assign { var, expr } => {
                let k = cmap
                    .vars
                    .iter()
                    .position(|v| v == var)
                    .ok_or_else(|| ConvertError::UnknownVariable {
                        line: i,
                        var: var.to_string(),
                    })?;
                let mut args = xs.clone();
                args[k] = expr.clone();
                let rhs = cmap.state(next(i)?, args).expect("well-sorted");
                add(&mut r, format!("l{i}"), i, rhs, Term::tt())?;
            }
            Command::Skip => add(&mut r, format!("l{i}"), i, here(next(i)?), Term::tt())?,
            Command::IfOpen { cond } => {
                let Some(Block::If { else_line, .. }) = ast.block(i) else {
                    return Err(ConvertError::Structure { line: i });
                };
                add(&mut r, format!("l{i}+"), i, here(next(i)?), cond.clone())?;
                add(&mut r, format!("l{i}-"), i, here(next(else_line)?), build::not(cond.clone()))?;
            }
            Command::WhileOpen { guard, .. } => {
                let Some(Block::While { close, .. }) = ast.block(i) else {
                    return Err(ConvertError::Structure { line: i });
                };
                add(&mut r, format!("l{i}+"), i, here(next(i)?), guard.clone())?;
                add(&mut r, format!("l{i}-"), i, here(next(close)?), build::not(guard.clone()))?;
            }
            Command::ElseOpen => {
                let Some(Block::If { close, .. }) = ast.block_of(i) else {
                    return Err(ConvertError::Structure { line: i });
                };
                add(&mut r, format!("l{i}"), i, here(next(close)?), Term::tt())?;
            }
            Command::Close => {
                let target = match ast.block_of(i) {
                    Some(Block::While { open, .. }) => open,
                    Some(Block::If { .. }) => next(i)?,
                    None => return Err(ConvertError::Structure { line: i }),
                };
                add(&mut r, format!("l{i}"), i, here(target), Term::tt())?;
            }
            Command::Assert { .. } | Command::Blank => {}
        }
    }
    Ok((r, cmap))
}

/// `chk(end(x⃗)) → true [ψ]` and `chk(end(x⃗)) → false [¬ψ]`.
pub fn make_check_rules(post: &Term, cmap: &ConversionMap) -> Result<Lctrs, ConvertError> {
    // A variable outside the state would be a fresh logical variable in
    // both rules, letting them overlap.
    if let Some(v) = post.vars().into_iter().find(|v| !cmap.vars.contains(v)) {
        return Err(ConvertError::PostVariable(v.name().to_string()));
    }
    let lhs = cmap.check(cmap.state_at(cmap.end).expect("end state"));
    let mut r = Lctrs::new();
    r.declare_fun(cmap.chk.clone());
    r.add_rule(ConstrainedRule::new("chk+", lhs.clone(), Term::tt(), post.clone(), Origin::Check)?)?;
    r.add_rule(ConstrainedRule::new("chk-", lhs, Term::ff(), build::not(post.clone()), Origin::Check)?)?;
    Ok(r)
}

/// `chk(start(x⃗)) ≈ true [φ]`, labelled `goal`.
pub fn make_goal(pre: &Term, cmap: &ConversionMap) -> ConstrainedEquation {
    let start = cmap.state_at(cmap.start).expect("start state");
    ConstrainedEquation::new("goal", cmap.check(start), Term::tt(), pre.clone())
}

/// Result of running the rewrite system on a ground state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Simulation {
    /// Reached `end(v⃗)` after `steps` rewrite steps.
    Ended { state: Valuation, steps: usize },
    /// A normal form other than `end(v⃗)`.
    Stuck(Term),
    OutOfFuel(Term),
}

/// Rewrites `state_line(θ)` innermost until a normal form or `fuel` steps.
pub fn simulate(r: &Lctrs, cmap: &ConversionMap, line: usize, theta: &Valuation, fuel: usize) -> Simulation {
    let Some(mut t) = cmap.ground_state(line, theta) else {
        return Simulation::Stuck(Term::tt());
    };
    for steps in 0..=fuel {
        match innermost_step(r, &t) {
            Some(st) if steps < fuel => t = st.result,
            Some(_) => return Simulation::OutOfFuel(t),
            None => {
                return match cmap.valuation_of(&t) {
                    Some((l, state)) if l == cmap.end => Simulation::Ended { state, steps },
                    _ => Simulation::Stuck(t),
                }
            }
        }
    }
    unreachable!("loop returns")
}

/// Instantiates the program variables, e.g. to build ground goal instances.
pub fn valuation_subst(theta: &Valuation) -> Substitution {
    Substitution::from_pairs(theta.0.iter().map(|(v, n)| (v.clone(), Term::int(BigInt::clone(n)))))
        .expect("integer values")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lctrs::{check_orthogonal, check_quasi_reductive, print_rules};
    use crate::solver::Solver;
    use crate::syntax::parse_constraint;
    use crate::whilelang::{interpret, parse_program};

    const P_SUM: &str = "i := 0;\nz := 0;\nwhile (x > i) {\n z := z + i + 1;\n i := i + 1;\n}\n";

    #[test]
    fn post_conditions_range_over_program_variables() {
        let (_, cmap) = convert(&parse_program(P_SUM).unwrap()).unwrap();
        assert_eq!(
            make_check_rules(&parse_constraint("y >= 0").unwrap(), &cmap),
            Err(ConvertError::PostVariable("y".into()))
        );
    }

    #[test]
    fn sum_program_gives_seven_rules() {
        let (r, cmap) = convert(&parse_program(P_SUM).unwrap()).unwrap();
        assert_eq!(
            print_rules(&r),
            "\
l1: state1(x,i,z) -> state2(x,0,z)
l2: state2(x,i,z) -> state3(x,i,0)
l3+: state3(x,i,z) -> state4(x,i,z) [x > i]
l3-: state3(x,i,z) -> end(x,i,z) [!(x > i)]
l4: state4(x,i,z) -> state5(x,i,z + i + 1)
l5: state5(x,i,z) -> state6(x,i + 1,z)
l6: state6(x,i,z) -> state3(x,i,z)
"
        );
        assert_eq!((cmap.start_line(), cmap.end_line()), (1, 7));
        let solver = Solver::builtin();
        assert!(check_orthogonal(&r, &solver).ok);
        assert!(check_quasi_reductive(&r, &solver).ok);
    }

    #[test]
    fn tableau_lines_are_skipped() {
        let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/sum.whl")).unwrap();
        let ast = parse_program(&src).unwrap();
        let (r, cmap) = convert(&ast).unwrap();
        let lines: Vec<usize> = cmap.states().keys().copied().collect();
        assert_eq!(lines, vec![3, 6, 9, 12, 14, 16, 19]);
        assert_eq!(cmap.end_symbol().name(), END);
        assert_eq!(r.rule("l9-").unwrap().to_string(), "state9(x,i,z) -> end(x,i,z) [!(x > i)]");
        assert_eq!(r.rule("l16").unwrap().to_string(), "state16(x,i,z) -> state9(x,i,z)");
        // Stripping assertions does not change the rules.
        let (r2, _) = convert(&ast.strip_annotations()).unwrap();
        assert_eq!(r, r2);
    }

    #[test]
    fn skip_only_and_branches() {
        let (r, _) = convert(&parse_program("skip;\n").unwrap()).unwrap();
        assert_eq!(print_rules(&r), "l1: state1 -> end\n");
        let src = "if (x > 0) {\n y := 1;\n} else {\n y := 2;\n}\n";
        let (r, cmap) = convert(&parse_program(src).unwrap()).unwrap();
        assert_eq!(
            print_rules(&r),
            "\
l1+: state1(x,y) -> state2(x,y) [x > 0]
l1-: state1(x,y) -> state4(x,y) [!(x > 0)]
l2: state2(x,y) -> state3(x,1)
l3: state3(x,y) -> end(x,y)
l4: state4(x,y) -> state5(x,2)
l5: state5(x,y) -> end(x,y)
"
        );
        let solver = Solver::builtin();
        let chk = make_check_rules(&parse_constraint("y > 0").unwrap(), &cmap).unwrap();
        let all = r.union(&chk).unwrap();
        assert!(check_orthogonal(&all, &solver).ok);
        assert!(check_quasi_reductive(&all, &solver).ok);
    }

    #[test]
    fn check_rules_and_goal() {
        let (_, cmap) = convert(&parse_program(P_SUM).unwrap()).unwrap();
        let post = parse_constraint("2 * z = x * (x + 1)").unwrap();
        let chk = make_check_rules(&post, &cmap).unwrap();
        assert_eq!(
            print_rules(&chk),
            "chk+: chk(end(x,i,z)) -> true [2 * z = x * (x + 1)]\nchk-: chk(end(x,i,z)) -> false [!(2 * z = x * (x + 1))]\n"
        );
        let goal = make_goal(&parse_constraint("x >= 0").unwrap(), &cmap);
        assert_eq!(goal.body(), "chk(state1(x,i,z)) ≈ true [x >= 0]");
    }

    #[test]
    fn rewriting_agrees_with_interpreter() {
        let ast = parse_program(P_SUM).unwrap();
        let (r, cmap) = convert(&ast).unwrap();
        for x in 0..5 {
            let theta = Valuation::from_pairs([("x", x), ("i", -1), ("z", 2)]);
            let expected = interpret(&ast, &theta, 1000).unwrap();
            match simulate(&r, &cmap, cmap.start_line(), &theta, 10_000) {
                Simulation::Ended { state, .. } => assert_eq!(Some(&state), expected.halted()),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn nonterminating_variant_from_loop_header() {
        let ast = parse_program(&P_SUM.replace("x > i", "x != i")).unwrap();
        let (r, cmap) = convert(&ast).unwrap();
        let theta = Valuation::from_pairs([("x", 0), ("i", 1), ("z", 0)]);
        assert!(matches!(simulate(&r, &cmap, 3, &theta, 5000), Simulation::OutOfFuel(_)));
    }
}
