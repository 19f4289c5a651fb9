//! Multivariate polynomials with rational coefficients over opaque integer atoms.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::terms::Term;
use crate::theory::Op;

/// A product of atoms with positive exponents. The empty monomial is `1`.
pub type Monomial = BTreeMap<Term, u32>;

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Monomial::new(), c);
        }
        p
    }

    pub fn int(n: i64) -> Poly {
        Poly::constant(BigRational::from_integer(n.into()))
    }

    pub fn atom(t: Term) -> Poly {
        let mut m = Monomial::new();
        m.insert(t, 1);
        let mut p = Poly::zero();
        p.terms.insert(m, BigRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn constant_term(&self) -> BigRational {
        self.terms
            .get(&Monomial::new())
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// `Some(c)` when the polynomial has no atoms.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Monomial::new()).cloned(),
            _ => None,
        }
    }

    pub fn coeff(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m = m1.clone();
                for (a, e) in m2 {
                    *m.entry(a.clone()).or_insert(0) += e;
                }
                out.add_term(m, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::int(1);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Atoms occurring in the polynomial.
    pub fn atoms(&self) -> impl Iterator<Item = &Term> {
        self.terms.keys().flat_map(|m| m.keys())
    }

    /// An atom that occurs only in the degree-one monomial `a`, with its coefficient.
    pub fn linear_atoms(&self) -> Vec<(Term, BigRational)> {
        let mut out = Vec::new();
        for (m, c) in &self.terms {
            if m.len() == 1 {
                let (a, e) = m.iter().next().expect("one atom");
                if *e == 1 && self.terms.keys().filter(|m2| m2.contains_key(a)).count() == 1 {
                    out.push((a.clone(), c.clone()));
                }
            }
        }
        out
    }

    /// Replaces atom `a` by polynomial `q`.
    pub fn substitute(&self, a: &Term, q: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            match m.get(a) {
                None => out.add_term(m.clone(), c.clone()),
                Some(&e) => {
                    let mut rest = m.clone();
                    rest.remove(a);
                    let mut base = Poly::zero();
                    base.terms.insert(rest, c.clone());
                    out = out.add(&base.mul(&q.pow(e)));
                }
            }
        }
        out
    }

    /// Multiplies through so every coefficient is an integer with gcd 1
    /// (the sign is kept).
    pub fn primitive(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let mut den = BigInt::one();
        for c in self.terms.values() {
            den = den.lcm(c.denom());
        }
        let scaled = self.scale(&BigRational::from_integer(den));
        let mut g = BigInt::zero();
        for c in scaled.terms.values() {
            g = g.gcd(c.numer());
        }
        scaled.scale(&BigRational::new(BigInt::one(), g))
    }

    /// For `p ≥ 0` with integer-valued atoms: divide by the gcd of the
    /// non-constant coefficients and round the constant down.
    pub fn tighten_ge(&self) -> Poly {
        let p = self.primitive();
        let mut g = BigInt::zero();
        for (m, c) in &p.terms {
            if !m.is_empty() {
                g = g.gcd(c.numer());
            }
        }
        if g.is_zero() || g.is_one() {
            return p;
        }
        let mut out = Poly::zero();
        for (m, c) in &p.terms {
            let v = if m.is_empty() {
                BigRational::from_integer(c.numer().div_floor(&g))
            } else {
                BigRational::from_integer(c.numer() / &g)
            };
            out.add_term(m.clone(), v);
        }
        out
    }

    /// Converts an integer-sorted logical term. `div`, `mod` and `exp`
    /// subterms become opaque atoms; `exp` with literal exponent expands.
    pub fn from_term(t: &Term) -> Poly {
        match t {
            Term::Int(n) => Poly::constant(BigRational::from_integer(n.clone())),
            Term::Op(Op::Add, a) => Poly::from_term(&a[0]).add(&Poly::from_term(&a[1])),
            Term::Op(Op::Sub, a) => Poly::from_term(&a[0]).sub(&Poly::from_term(&a[1])),
            Term::Op(Op::Mul, a) => Poly::from_term(&a[0]).mul(&Poly::from_term(&a[1])),
            Term::Op(Op::Exp, a) => match &a[1] {
                Term::Int(k) if !k.is_negative() && *k <= BigInt::from(64) => {
                    Poly::from_term(&a[0]).pow(u32::try_from(k).expect("small"))
                }
                _ => Poly::atom(t.clone()),
            },
            _ => Poly::atom(t.clone()),
        }
    }

    /// Back to a term with integer coefficients; requires integral coefficients.
    pub fn to_term(&self) -> Term {
        let mut acc: Option<Term> = None;
        for (m, c) in &self.terms {
            debug_assert!(c.is_integer());
            let c = c.to_integer();
            let mut factors: Vec<Term> = Vec::new();
            for (a, e) in m {
                for _ in 0..*e {
                    factors.push(a.clone());
                }
            }
            let mono = factors
                .into_iter()
                .reduce(|x, y| Term::op(Op::Mul, vec![x, y]));
            let (neg, mag) = (c.is_negative(), c.abs());
            let body = match mono {
                None => Term::Int(mag),
                Some(mono) if mag.is_one() => mono,
                Some(mono) => Term::op(Op::Mul, vec![Term::Int(mag), mono]),
            };
            acc = Some(match (acc, neg) {
                (None, false) => body,
                (None, true) => match body {
                    Term::Int(n) => Term::Int(-n),
                    b => Term::op(Op::Sub, vec![Term::int(0), b]),
                },
                (Some(a), false) => Term::op(Op::Add, vec![a, body]),
                (Some(a), true) => Term::op(Op::Sub, vec![a, body]),
            });
        }
        acc.unwrap_or_else(|| Term::int(0))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (a, e) in m {
                write!(f, "*{a}")?;
                if *e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}
