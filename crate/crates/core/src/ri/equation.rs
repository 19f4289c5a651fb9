use std::collections::BTreeSet;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::terms::{Substitution, Term, Var};

/// `s ≈ t [φ]` with a label such as `A1` or `goal.2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstrainedEquation {
    pub label: String,
    pub lhs: Term,
    pub rhs: Term,
    pub constraint: Term,
}

impl ConstrainedEquation {
    pub fn new(label: impl Into<String>, lhs: Term, rhs: Term, constraint: Term) -> ConstrainedEquation {
        ConstrainedEquation {
            label: label.into(),
            lhs,
            rhs,
            constraint,
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = self.lhs.vars();
        self.rhs.collect_vars(&mut out);
        self.constraint.collect_vars(&mut out);
        out
    }

    pub fn apply(&self, s: &Substitution) -> ConstrainedEquation {
        ConstrainedEquation {
            label: self.label.clone(),
            lhs: self.lhs.apply(s),
            rhs: self.rhs.apply(s),
            constraint: self.constraint.apply(s),
        }
    }

    /// Generated variables renamed `_vc1`, `_vc2`, … in order of first
    /// occurrence, so that re-running a step reproduces the same names.
    pub fn canonical_names(&self) -> ConstrainedEquation {
        let mut seen: Vec<Var> = Vec::new();
        for t in [&self.lhs, &self.rhs, &self.constraint] {
            for v in t.vars_ordered() {
                if v.is_generated() && !seen.contains(&v) {
                    seen.push(v);
                }
            }
        }
        let renaming = seen.iter().enumerate().filter_map(|(k, v)| {
            let name = format!("{}c{}", crate::terms::FRESH_PREFIX, k + 1);
            (v.name() != name).then(|| (v.clone(), Term::Var(Var::new(&name, v.sort().clone()))))
        });
        let s = Substitution::from_pairs(renaming).expect("renaming keeps sorts");
        if s.is_empty() {
            self.clone()
        } else {
            self.apply(&s)
        }
    }

    /// Same equation with the sides swapped.
    pub fn flipped(&self) -> ConstrainedEquation {
        ConstrainedEquation {
            label: self.label.clone(),
            lhs: self.rhs.clone(),
            rhs: self.lhs.clone(),
            constraint: self.constraint.clone(),
        }
    }

    /// Equal up to the label.
    pub fn same_content(&self, other: &ConstrainedEquation) -> bool {
        self.lhs == other.lhs && self.rhs == other.rhs && self.constraint == other.constraint
    }

    /// The body without the label, `s ≈ t [φ]`.
    pub fn body(&self) -> String {
        format!("{} ≈ {} [{}]", self.lhs, self.rhs, self.constraint)
    }
}

impl fmt::Display for ConstrainedEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {}", self.label, self.body())
    }
}

impl Serialize for ConstrainedEquation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ConstrainedEquation", 4)?;
        st.serialize_field("label", &self.label)?;
        st.serialize_field("lhs", &self.lhs.to_string())?;
        st.serialize_field("rhs", &self.rhs.to_string())?;
        st.serialize_field("constraint", &self.constraint.to_string())?;
        st.end()
    }
}
