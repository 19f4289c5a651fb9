//! Rewriting of constrained terms `⟨s, [φ]⟩` and the restricted
//! equivalence normalization used after program steps.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::ConstrainedRule;
use num_rational::BigRational;
use num_traits::One;

use crate::solver::poly::{Monomial, Poly};
use crate::solver::{Model, Solver, SolverVerdict};
use crate::terms::{match_term, Position, Sort, Substitution, Term, Var};
use crate::theory::{build, eval_ground, Op, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstrainedTerm {
    pub term: Term,
    pub constraint: Term,
}

impl ConstrainedTerm {
    pub fn new(term: Term, constraint: Term) -> ConstrainedTerm {
        ConstrainedTerm { term, constraint }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut v = self.term.vars();
        self.constraint.collect_vars(&mut v);
        v
    }

    pub fn apply(&self, s: &Substitution) -> ConstrainedTerm {
        ConstrainedTerm::new(self.term.apply(s), self.constraint.apply(s))
    }
}

impl fmt::Display for ConstrainedTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}, [{}]⟩", self.term, self.constraint)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewriteError {
    #[error("position {0} does not exist")]
    InvalidPosition(Position),
    #[error("rule {rule} does not match {subterm}")]
    NoMatch { rule: String, subterm: String },
    #[error("rule {rule}: logical variable {var} would be bound to {image}, which is neither a value nor a constraint variable")]
    LogicalVariable { rule: String, var: String, image: String },
    #[error("rule {rule}: the constraint does not imply the guard {guard} (counterexample {counterexample})")]
    GuardNotImplied { rule: String, guard: String, counterexample: Model },
    #[error("rule {rule}: could not decide whether the guard {guard} is implied: {reason}")]
    GuardUnknown { rule: String, guard: String, reason: String },
}

impl RewriteError {
    /// The failure came from an undecided solver query.
    pub fn is_unknown(&self) -> bool {
        matches!(self, RewriteError::GuardUnknown { .. })
    }
}

/// One `→_base` step with `rule` at position `q`.
///
/// Logical variables of the rule not fixed by matching (the result of a
/// calculation) are bound to fresh variables and the instantiated guard is
/// added to the constraint.
pub fn base_step(
    solver: &Solver,
    ct: &ConstrainedTerm,
    rule: &ConstrainedRule,
    q: &Position,
) -> Result<ConstrainedTerm, RewriteError> {
    let sub = ct
        .term
        .subterm_at(q)
        .map_err(|_| RewriteError::InvalidPosition(q.clone()))?;
    let mut gamma = match_term(rule.lhs(), sub).ok_or_else(|| RewriteError::NoMatch {
        rule: rule.id().to_string(),
        subterm: sub.to_string(),
    })?;
    let constraint_vars = ct.constraint.vars();
    let lhs_vars = rule.lhs().vars();
    let mut fresh_bound = false;
    for v in rule.lvars() {
        let bound = gamma
            .get(v)
            .cloned()
            .or_else(|| lhs_vars.contains(v).then(|| Term::Var(v.clone())));
        match bound {
            Some(img) => {
                let ok = img.is_value()
                    || img.as_var().is_some_and(|w| constraint_vars.contains(w));
                if !ok {
                    return Err(RewriteError::LogicalVariable {
                        rule: rule.id().to_string(),
                        var: v.to_string(),
                        image: img.to_string(),
                    });
                }
            }
            None => {
                gamma
                    .insert(v.clone(), Term::Var(Var::fresh(v.sort().clone())))
                    .expect("same sort");
                fresh_bound = true;
            }
        }
    }
    let guard = rule.guard().apply(&gamma);
    let constraint = if fresh_bound {
        build::and(ct.constraint.clone(), guard)
    } else {
        if guard != Term::tt() {
            match solver.check_implies(&ct.constraint, &guard) {
                SolverVerdict::Valid => {}
                SolverVerdict::Invalid(m) => {
                    return Err(RewriteError::GuardNotImplied {
                        rule: rule.id().to_string(),
                        guard: guard.to_string(),
                        counterexample: m,
                    })
                }
                SolverVerdict::Unknown(r) => {
                    return Err(RewriteError::GuardUnknown {
                        rule: rule.id().to_string(),
                        guard: guard.to_string(),
                        reason: r,
                    })
                }
            }
        }
        ct.constraint.clone()
    };
    let rhs = rule.rhs().apply(&gamma);
    let term = ct
        .term
        .replace_at(q, rhs)
        .map_err(|_| RewriteError::InvalidPosition(q.clone()))?;
    Ok(ConstrainedTerm::new(term, constraint))
}

/// How a normalization step was justified.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormStep {
    /// A variable argument was renamed throughout.
    Rename { from: String, to: String },
    /// `e` was abstracted: the argument became `x` with conjunct `x = e`.
    Abstract { var: String, expr: String },
    /// An invertible argument `x ± t` was moved into the constraint by inverse substitution.
    Invert { var: String, expr: String },
    /// Conjuncts that evaluate to true were dropped.
    DropTrue,
    /// The constraint was replaced by an equivalent target.
    Target { certified_by: String },
}

/// Result of normalization. `ct` is always equivalent to the input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizeOutcome {
    pub ct: ConstrainedTerm,
    pub steps: Vec<NormStep>,
    /// The requested target constraint was reached exactly.
    pub reached_target: bool,
}

/// Finds the first state-sorted application whose arguments are all logical.
fn state_position(t: &Term, arity: usize) -> Option<Position> {
    t.positions().into_iter().find(|p| {
        let s = t.subterm_at(p).expect("own position");
        matches!(s, Term::App(f, args)
            if *f.result_sort() == Sort::state()
                && args.len() == arity
                && args.iter().all(|a| a.is_logical() && a.sort() == Sort::Int))
    })
}

fn rename_everywhere(ct: &ConstrainedTerm, from: &Var, to: &Var) -> ConstrainedTerm {
    let s = Substitution::from_pairs([(from.clone(), Term::Var(to.clone()))]).expect("sorts agree");
    ct.apply(&s)
}

fn drop_true_conjuncts(phi: &Term) -> Term {
    let kept: Vec<Term> = build::conjuncts(phi)
        .into_iter()
        .filter(|c| !(c.is_ground() && eval_ground(c) == Ok(Value::Bool(true))))
        .collect();
    build::conj(kept)
}

/// For `e = ±x + t` with `x ∉ t`, the inverse `±(x - t)`, so that
/// `e{x ↦ inverse} = x`.
fn inverse_of(e: &Term, x: &Var) -> Option<Term> {
    let xv = Term::Var(x.clone());
    // Cheap syntactic shapes first, so that printed constraints stay readable.
    match e {
        Term::Op(op @ (Op::Add | Op::Sub), a) if a[0] == xv && !a[1].contains_var(x) => {
            let inv = if *op == Op::Add { Op::Sub } else { Op::Add };
            return Some(Term::op(inv, vec![xv, a[1].clone()]));
        }
        Term::Op(Op::Add, a) if a[1] == xv && !a[0].contains_var(x) => {
            return Some(Term::op(Op::Sub, vec![xv, a[0].clone()]));
        }
        _ => {}
    }
    if !e.is_logical() || e.sort() != Sort::Int {
        return None;
    }
    let p = Poly::from_term(e);
    let mono: Monomial = [(xv.clone(), 1)].into_iter().collect();
    let c = p.coeff(&mono);
    let rest = p.sub(&Poly::atom(xv.clone()).scale(&c));
    if rest.atoms().any(|a| a.contains_var(x)) || !rest.terms().all(|(_, k)| k.is_integer()) {
        return None;
    }
    let one = BigRational::one();
    let inv = if c == one {
        Poly::atom(xv).sub(&rest)
    } else if c == -one {
        rest.sub(&Poly::atom(xv))
    } else {
        return None;
    };
    Some(inv.to_term())
}

/// Brings the state arguments of `ct` back to the canonical variables
/// `canon`, moving expressions into the constraint. With a `target`, tries
/// to make the constraint exactly `target` when that is an equivalent
/// representation; otherwise the exact representative is returned and
/// `reached_target` is false.
pub fn normalize_ct(
    solver: &Solver,
    ct: &ConstrainedTerm,
    canon: &[Var],
    target: Option<&Term>,
) -> NormalizeOutcome {
    let mut steps = Vec::new();
    let Some(pos) = state_position(&ct.term, canon.len()) else {
        return finish(solver, ct.clone(), steps, target, false);
    };
    let args = |c: &ConstrainedTerm| c.term.subterm_at(&pos).expect("state position").args().to_vec();
    let initial = args(ct);
    let differing: Vec<usize> = (0..canon.len())
        .filter(|&k| initial[k].as_var() != Some(&canon[k]))
        .collect();
    if differing.is_empty() {
        return finish(solver, ct.clone(), steps, target, false);
    }

    // A single invertible change checked directly against the target.
    if let (Some(psi), [k]) = (target, differing.as_slice()) {
        let (x, e) = (&canon[*k], &initial[*k]);
        let others_free = (0..canon.len())
            .filter(|j| j != k)
            .all(|j| !initial[j].contains_var(x));
        if others_free && (inverse_of(e, x).is_some() || !ct.constraint.contains_var(x)) {
            let sigma = Substitution::from_pairs([(x.clone(), e.clone())]).expect("int");
            let shifted = psi.apply(&sigma);
            let mut new_term = ct.term.clone();
            new_term = new_term
                .replace_at(&pos.child(*k + 1), Term::Var(x.clone()))
                .expect("int argument");
            if inverse_of(e, x).is_some() {
                // x ↦ x ± t is a bijection on valuations, so equal
                // constraints give equal instance sets.
                let certified = if shifted == ct.constraint {
                    Some("syntactic".to_string())
                } else if solver.check_equiv(&ct.constraint, &shifted).is_valid() {
                    Some("equivalence".to_string())
                } else {
                    None
                };
                if let Some(how) = certified {
                    steps.push(NormStep::Target { certified_by: how });
                    return NormalizeOutcome {
                        ct: ConstrainedTerm::new(new_term, psi.clone()),
                        steps,
                        reached_target: true,
                    };
                }
            }
        }
    }

    let mut cur = ct.clone();
    for &k in &differing {
        let x = canon[k].clone();
        let a = args(&cur);
        let e = a[k].clone();
        if e.as_var() == Some(&x) {
            continue;
        }
        let linear_var = e.as_var().is_some() && a.iter().filter(|t| **t == e).count() == 1;
        // Keep the canonical name free before it is reused.
        let x_used = cur.vars().contains(&x);
        if linear_var {
            let y = e.as_var().expect("variable").clone();
            if x_used {
                cur = rename_everywhere(&cur, &x, &Var::fresh(x.sort().clone()));
            }
            cur = rename_everywhere(&cur, &y, &x);
            steps.push(NormStep::Rename {
                from: y.to_string(),
                to: x.to_string(),
            });
            continue;
        }
        let others_use_x = a
            .iter()
            .enumerate()
            .any(|(j, t)| j != k && t.contains_var(&x));
        if let (Some(inv), false) = (inverse_of(&e, &x), others_use_x) {
            let sub_inv = Substitution::from_pairs([(x.clone(), inv.clone())]).expect("int");
            let sub_fwd = Substitution::from_pairs([(x.clone(), e.clone())]).expect("int");
            // Prefer replacing the literal occurrences of e by x.
            let anti = cur.constraint.replace_subterm(&e, &Term::Var(x.clone()));
            let constraint = if anti.apply(&sub_fwd) == cur.constraint {
                anti
            } else {
                cur.constraint.apply(&sub_inv)
            };
            let term = cur
                .term
                .replace_at(&pos.child(k + 1), Term::Var(x.clone()))
                .expect("int argument");
            cur = ConstrainedTerm::new(term, constraint);
            steps.push(NormStep::Invert {
                var: x.to_string(),
                expr: e.to_string(),
            });
            continue;
        }
        if x_used {
            cur = rename_everywhere(&cur, &x, &Var::fresh(x.sort().clone()));
        }
        let e_now = args(&cur)[k].clone();
        let term = cur
            .term
            .replace_at(&pos.child(k + 1), Term::Var(x.clone()))
            .expect("int argument");
        let constraint = build::and(cur.constraint.clone(), build::eq(Term::Var(x.clone()), e_now.clone()));
        cur = ConstrainedTerm::new(term, constraint);
        steps.push(NormStep::Abstract {
            var: x.to_string(),
            expr: e_now.to_string(),
        });
    }
    finish(solver, cur, steps, target, true)
}

fn finish(
    solver: &Solver,
    mut ct: ConstrainedTerm,
    mut steps: Vec<NormStep>,
    target: Option<&Term>,
    changed: bool,
) -> NormalizeOutcome {
    if changed {
        let dropped = drop_true_conjuncts(&ct.constraint);
        if dropped != ct.constraint {
            ct.constraint = dropped;
            steps.push(NormStep::DropTrue);
        }
    }
    let Some(psi) = target else {
        return NormalizeOutcome {
            ct,
            steps,
            reached_target: false,
        };
    };
    if ct.constraint == *psi {
        return NormalizeOutcome {
            ct,
            steps,
            reached_target: true,
        };
    }
    // Without auxiliary variables, equivalent constraints describe the same instances.
    let aux = ct.constraint.vars().iter().any(|v| v.is_generated())
        || psi.vars().iter().any(|v| !ct.term.vars().contains(v) && !ct.constraint.vars().contains(v));
    if !aux && solver.check_equiv(&ct.constraint, psi).is_valid() {
        ct.constraint = psi.clone();
        steps.push(NormStep::Target {
            certified_by: "equivalence".into(),
        });
        return NormalizeOutcome {
            ct,
            steps,
            reached_target: true,
        };
    }
    NormalizeOutcome {
        ct,
        steps,
        reached_target: false,
    }
}

/// `→_base` with `rule` at `q`, followed by normalization.
pub fn rewrite_constrained(
    solver: &Solver,
    ct: &ConstrainedTerm,
    rule: &ConstrainedRule,
    q: &Position,
    canon: &[Var],
    target: Option<&Term>,
) -> Result<NormalizeOutcome, RewriteError> {
    let stepped = base_step(solver, ct, rule, q)?;
    Ok(normalize_ct(solver, &stepped, canon, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lctrs::Origin;
    use crate::syntax::parse_constraint;
    use crate::terms::FunSym;
    use crate::theory::build::*;

    fn canon() -> Vec<Var> {
        ["x", "i", "z"].iter().map(|n| Var::int(n)).collect()
    }

    fn state(n: usize, args: Vec<Term>) -> Term {
        let f = FunSym::new(&format!("state{n}"), vec![Sort::Int; 3], Sort::state());
        Term::app(&f, args).unwrap()
    }

    fn xs() -> Vec<Term> {
        vec![var("x"), var("i"), var("z")]
    }

    fn c(s: &str) -> Term {
        parse_constraint(s).unwrap()
    }

    #[test]
    fn assignment_of_a_constant() {
        let s = Solver::builtin();
        let rule = ConstrainedRule::new(
            "l1",
            state(1, xs()),
            state(2, vec![var("x"), int(0), var("z")]),
            Term::tt(),
            Origin::ProgramLine { line: 1 },
        )
        .unwrap();
        let ct = ConstrainedTerm::new(state(1, xs()), c("x >= 0 && 0 = 0"));
        let out = rewrite_constrained(&s, &ct, &rule, &Position::root(), &canon(), None).unwrap();
        assert_eq!(out.ct.term, state(2, xs()));
        assert_eq!(out.ct.constraint.to_string(), "x >= 0 && i = 0");
    }

    #[test]
    fn inverse_substitution_recovers_the_assertion() {
        let s = Solver::builtin();
        let phi = c("z = 1/2 * (i + 1) * (i + 2) && x >= i + 1");
        let sigma = Substitution::from_pairs([(Var::int("z"), add(add(var("z"), var("i")), int(1)))]).unwrap();
        let ct = ConstrainedTerm::new(
            state(5, vec![var("x"), var("i"), add(add(var("z"), var("i")), int(1))]),
            phi.apply(&sigma),
        );
        let out = normalize_ct(&s, &ct, &canon(), None);
        assert_eq!(out.ct, ConstrainedTerm::new(state(5, xs()), phi));
    }

    #[test]
    fn invertible_step_certified_against_target() {
        let s = Solver::builtin();
        let ct = ConstrainedTerm::new(
            state(6, vec![var("x"), add(var("i"), int(1)), var("z")]),
            c("z = 1/2 * (i + 1) * (i + 2) && x >= i + 1"),
        );
        let target = c("z = 1/2 * i * (i + 1) && x >= i");
        let out = normalize_ct(&s, &ct, &canon(), Some(&target));
        assert!(out.reached_target);
        assert_eq!(out.ct, ConstrainedTerm::new(state(6, xs()), target));
    }

    #[test]
    fn canonical_terms_are_unchanged() {
        let s = Solver::builtin();
        let end = FunSym::new("end", vec![Sort::Int; 3], Sort::state());
        let ct = ConstrainedTerm::new(Term::app(&end, xs()).unwrap(), c("z = x"));
        assert_eq!(normalize_ct(&s, &ct, &canon(), None).ct, ct);
    }

    #[test]
    fn non_invertible_update_uses_a_fresh_variable() {
        let s = Solver::builtin();
        let ct = ConstrainedTerm::new(
            state(2, vec![var("x"), mul(int(2), var("i")), var("z")]),
            c("i >= 1"),
        );
        let out = normalize_ct(&s, &ct, &canon(), Some(&c("i >= 2")));
        assert!(!out.reached_target);
        let cs = build::conjuncts(&out.ct.constraint);
        assert_eq!(cs.len(), 2);
        assert!(out.ct.constraint.vars().iter().any(|v| v.is_generated()));
        // The representative still implies the weaker assertion.
        assert!(s.check_implies(&out.ct.constraint, &c("i >= 2")).is_valid());
    }

    #[test]
    fn guard_must_be_implied() {
        let s = Solver::builtin();
        let rule = ConstrainedRule::new(
            "l3+",
            state(3, xs()),
            state(4, xs()),
            c("x > i"),
            Origin::ProgramLine { line: 3 },
        )
        .unwrap();
        let ct = ConstrainedTerm::new(state(3, xs()), c("!(x > i) && z = 0"));
        assert!(matches!(
            base_step(&s, &ct, &rule, &Position::root()),
            Err(RewriteError::GuardNotImplied { .. })
        ));
        let ok = ConstrainedTerm::new(state(3, xs()), c("x > i + 1"));
        assert_eq!(base_step(&s, &ok, &rule, &Position::root()).unwrap().term, state(4, xs()));
    }

    #[test]
    fn calculation_binds_a_fresh_result() {
        let s = Solver::builtin();
        let rule = crate::theory::calc_rule_for(Op::Sub);
        let ct = ConstrainedTerm::new(sub(var("a"), var("b")), c("a > b"));
        let out = base_step(&s, &ct, &rule, &Position::root()).unwrap();
        let v = out.term.as_var().expect("fresh result").clone();
        assert!(v.is_generated());
        assert!(out.constraint.contains_var(&v));
    }
}
