//! A small refutation procedure for quantifier-free integer constraints.
//!
//! Disjunctions are split lazily. Each conjunction of literals is refuted by
//! eliminating equalities through linearly occurring atoms, then running
//! Fourier-Motzkin over monomials with integer tightening. Nonlinear
//! monomials are treated as independent unknowns, so a refutation is always
//! sound while failure to refute says nothing.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::poly::{Monomial, Poly};
use crate::terms::{Sort, Term};
use crate::theory::Op;

const MAX_BRANCHES: usize = 4096;
const MAX_CONSTRAINTS: usize = 4000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// The formula has no model.
    Unsat,
    /// No refutation was found.
    Open,
    /// A resource limit was hit.
    GaveUp(String),
}

#[derive(Clone, Debug)]
enum Lit {
    /// `p ≥ 0`
    Ge(Poly),
    /// `p = 0`
    Eq(Poly),
    /// A boolean atom with polarity.
    Atom(Term, bool),
}

/// Tries to show that `phi` is unsatisfiable.
pub fn refute(phi: &Term) -> Outcome {
    let mut budget = MAX_BRANCHES;
    match search(Vec::new(), vec![(phi.clone(), true)], &mut budget) {
        Ok(true) => Outcome::Unsat,
        Ok(false) => Outcome::Open,
        Err(msg) => Outcome::GaveUp(msg),
    }
}

fn int_diff(a: &Term, b: &Term) -> Poly {
    Poly::from_term(a).sub(&Poly::from_term(b))
}

/// Returns `Ok(true)` when every branch is contradictory.
fn search(
    mut lits: Vec<Lit>,
    mut pending: Vec<(Term, bool)>,
    budget: &mut usize,
) -> Result<bool, String> {
    while let Some((f, pol)) = pending.pop() {
        match (&f, pol) {
            (Term::Bool(b), _) => {
                if *b != pol {
                    return Ok(true);
                }
            }
            (Term::Op(Op::Not, a), _) => pending.push((a[0].clone(), !pol)),
            (Term::Op(Op::And, a), true) | (Term::Op(Op::Or, a), false) => {
                pending.push((a[0].clone(), pol));
                pending.push((a[1].clone(), pol));
            }
            (Term::Op(Op::Implies, a), false) => {
                pending.push((a[0].clone(), true));
                pending.push((a[1].clone(), false));
            }
            (Term::Op(Op::Or, a), true) | (Term::Op(Op::And, a), false) => {
                let alts = [(a[0].clone(), pol), (a[1].clone(), pol)];
                return branch(&lits, &pending, alts, budget);
            }
            (Term::Op(Op::Implies, a), true) => {
                let alts = [(a[0].clone(), false), (a[1].clone(), true)];
                return branch(&lits, &pending, alts, budget);
            }
            (Term::Op(op @ (Op::Eq | Op::Ne), a), _) if a[0].sort() == Sort::Bool => {
                // a = b  is  (a ∧ b) ∨ (¬a ∧ ¬b)
                let same = (*op == Op::Eq) == pol;
                let (x, y) = (a[0].clone(), a[1].clone());
                let alts = if same {
                    [both(x.clone(), true, y.clone(), true), both(x, false, y, false)]
                } else {
                    [both(x.clone(), true, y.clone(), false), both(x, false, y, true)]
                };
                return branch(&lits, &pending, alts, budget);
            }
            (Term::Op(Op::Ge, a), true) => lits.push(Lit::Ge(int_diff(&a[0], &a[1]))),
            (Term::Op(Op::Ge, a), false) => {
                lits.push(Lit::Ge(int_diff(&a[1], &a[0]).sub(&Poly::int(1))))
            }
            (Term::Op(Op::Gt, a), true) => {
                lits.push(Lit::Ge(int_diff(&a[0], &a[1]).sub(&Poly::int(1))))
            }
            (Term::Op(Op::Gt, a), false) => lits.push(Lit::Ge(int_diff(&a[1], &a[0]))),
            (Term::Op(op @ (Op::Eq | Op::Ne), a), _) => {
                if (*op == Op::Eq) == pol {
                    lits.push(Lit::Eq(int_diff(&a[0], &a[1])));
                } else {
                    let d = int_diff(&a[0], &a[1]);
                    let lo = Lit::Ge(d.sub(&Poly::int(1)));
                    let hi = Lit::Ge(d.neg().sub(&Poly::int(1)));
                    return branch_lits(&lits, &pending, [lo, hi], budget);
                }
            }
            _ => lits.push(Lit::Atom(f.clone(), pol)),
        }
    }
    refute_conjunction(lits)
}

fn both(a: Term, pa: bool, b: Term, pb: bool) -> (Term, bool) {
    let la = if pa { a } else { Term::op(Op::Not, vec![a]) };
    let lb = if pb { b } else { Term::op(Op::Not, vec![b]) };
    (Term::op(Op::And, vec![la, lb]), true)
}

fn spend(budget: &mut usize) -> Result<(), String> {
    if *budget == 0 {
        return Err("case split limit reached".into());
    }
    *budget -= 1;
    Ok(())
}

fn branch(
    lits: &[Lit],
    pending: &[(Term, bool)],
    alts: [(Term, bool); 2],
    budget: &mut usize,
) -> Result<bool, String> {
    for alt in alts {
        spend(budget)?;
        let mut p = pending.to_vec();
        p.push(alt);
        if !search(lits.to_vec(), p, budget)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn branch_lits(
    lits: &[Lit],
    pending: &[(Term, bool)],
    alts: [Lit; 2],
    budget: &mut usize,
) -> Result<bool, String> {
    for alt in alts {
        spend(budget)?;
        let mut l = lits.to_vec();
        l.push(alt);
        if !search(l, pending.to_vec(), budget)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn refute_conjunction(lits: Vec<Lit>) -> Result<bool, String> {
    let mut eqs = Vec::new();
    let mut ges = Vec::new();
    let mut atoms: Vec<(Term, bool)> = Vec::new();
    for l in lits {
        match l {
            Lit::Eq(p) => eqs.push(p),
            Lit::Ge(p) => ges.push(p),
            Lit::Atom(t, pol) => {
                if atoms.iter().any(|(u, q)| *u == t && *q != pol) {
                    return Ok(true);
                }
                atoms.push((t, pol));
            }
        }
    }
    refute_arith(eqs, ges)
}

/// `Some(true)` on a contradiction, `Some(false)` if the constraint is
/// trivially true, `None` otherwise.
fn eq_status(p: &Poly) -> Option<bool> {
    if let Some(c) = p.as_constant() {
        return Some(!c.is_zero());
    }
    // Integer divisibility: the gcd of the atom coefficients must divide the constant.
    let q = p.primitive();
    let mut g = num_bigint::BigInt::zero();
    for (m, c) in q.terms() {
        if !m.is_empty() {
            g = num_integer::Integer::gcd(&g, c.numer());
        }
    }
    let c = q.constant_term();
    if !g.is_zero() && !(c.numer() % &g).is_zero() {
        return Some(true);
    }
    None
}

fn refute_arith(mut eqs: Vec<Poly>, mut ges: Vec<Poly>) -> Result<bool, String> {
    loop {
        let mut next_eqs = Vec::new();
        for p in eqs {
            match eq_status(&p) {
                Some(true) => return Ok(true),
                Some(false) => {}
                None => next_eqs.push(p.primitive()),
            }
        }
        eqs = next_eqs;
        let mut next_ges: Vec<Poly> = Vec::new();
        for p in ges {
            let p = p.tighten_ge();
            match p.as_constant() {
                Some(c) if c.is_negative() => return Ok(true),
                Some(_) => {}
                None => {
                    if !next_ges.contains(&p) {
                        next_ges.push(p)
                    }
                }
            }
        }
        ges = next_ges;

        // Opposite inequalities form an equality.
        let mut found = None;
        'pairs: for (i, p) in ges.iter().enumerate() {
            let np = p.neg();
            for (j, q) in ges.iter().enumerate().skip(i + 1) {
                if *q == np {
                    found = Some((i, j));
                    break 'pairs;
                }
            }
        }
        if let Some((i, j)) = found {
            let p = ges[i].clone();
            ges.remove(j);
            ges.remove(i);
            eqs.push(p);
            continue;
        }

        // Eliminate one atom through an equality where it occurs linearly.
        let mut solved = None;
        for (k, p) in eqs.iter().enumerate() {
            if let Some((a, c)) = p
                .linear_atoms()
                .into_iter()
                .min_by_key(|(_, c)| c.abs())
            {
                solved = Some((k, a, c));
                break;
            }
        }
        let Some((k, a, c)) = solved else { break };
        let p = eqs.remove(k);
        // a = -(p - c·a) / c
        let rest = p.sub(&Poly::atom(a.clone()).scale(&c));
        let value = rest.scale(&(-BigRational::from_integer(1.into()) / c));
        eqs = eqs.iter().map(|q| q.substitute(&a, &value)).collect();
        ges = ges.iter().map(|q| q.substitute(&a, &value)).collect();
    }

    for p in eqs {
        ges.push(p.clone());
        ges.push(p.neg());
    }
    // Even powers are non-negative.
    let mut squares: Vec<Monomial> = Vec::new();
    for p in &ges {
        for (m, _) in p.terms() {
            if !m.is_empty() && m.values().all(|e| e % 2 == 0) && !squares.contains(m) {
                squares.push(m.clone());
            }
        }
    }
    for m in squares {
        let mut p = Poly::zero();
        for (a, e) in &m {
            let f = Poly::atom(a.clone()).pow(*e);
            p = if p.is_zero() { f } else { p.mul(&f) };
        }
        ges.push(p);
    }
    fourier_motzkin(ges)
}

fn fourier_motzkin(mut ges: Vec<Poly>) -> Result<bool, String> {
    loop {
        let mut cleaned: Vec<Poly> = Vec::new();
        for p in ges {
            let p = p.tighten_ge();
            match p.as_constant() {
                Some(c) if c.is_negative() => return Ok(true),
                Some(_) => {}
                None => {
                    if !cleaned.contains(&p) {
                        cleaned.push(p);
                    }
                }
            }
        }
        ges = cleaned;
        if ges.is_empty() {
            return Ok(false);
        }
        if ges.len() > MAX_CONSTRAINTS {
            return Err("too many inequalities".into());
        }
        // Pick the monomial whose elimination creates the fewest constraints.
        let mut monos: Vec<Monomial> = Vec::new();
        for p in &ges {
            for (m, _) in p.terms() {
                if !m.is_empty() && !monos.contains(m) {
                    monos.push(m.clone());
                }
            }
        }
        let cost = |m: &Monomial| {
            let pos = ges.iter().filter(|p| p.coeff(m).is_positive()).count();
            let neg = ges.iter().filter(|p| p.coeff(m).is_negative()).count();
            pos * neg
        };
        let m = monos
            .iter()
            .min_by_key(|m| cost(m))
            .expect("non-constant constraint")
            .clone();
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for p in ges {
            let c = p.coeff(&m);
            if c.is_positive() {
                pos.push(p);
            } else if c.is_negative() {
                neg.push(p);
            } else {
                rest.push(p);
            }
        }
        for p in &pos {
            for q in &neg {
                let a = p.coeff(&m);
                let b = -q.coeff(&m);
                rest.push(p.scale(&b).add(&q.scale(&a)));
            }
        }
        ges = rest;
    }
}
