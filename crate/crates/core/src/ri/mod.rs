//! Rewriting induction: processes `(E, H)`, the five inference rules as
//! checked step constructors, and replay of recorded derivations.

pub mod equation;
pub mod rules;
pub mod trace;


use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lctrs::{ConstrainedRule, Lctrs, RewriteError};
use crate::solver::{Model, Solver};
use crate::terms::{FunSym, Position, Sort, Term, Var};

pub use equation::ConstrainedEquation;
pub use rules::{
    apply_case_splitting, apply_deletion, apply_expansion, apply_generalization, apply_simplification, apply_step,
    expd, replay_sequence, InferenceRule, InferenceStep, ReplayMismatch, Side, StepParams,
};
pub use trace::{digest_of, read_trace, replay_trace, write_trace, StepRecord, TraceError};

/// Prefix of rule ids for oriented hypotheses.
pub const HYP_PREFIX: &str = "hyp:";

/// A process `(E, H)` of rewriting induction.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Process {
    pub equations: Vec<ConstrainedEquation>,
    pub hypotheses: Vec<ConstrainedRule>,
}

impl Process {
    /// `({goals}, ∅)`.
    pub fn start(goals: Vec<ConstrainedEquation>) -> Process {
        Process {
            equations: goals,
            hypotheses: Vec::new(),
        }
    }

    pub fn equation(&self, label: &str) -> Option<&ConstrainedEquation> {
        self.equations.iter().find(|e| e.label == label)
    }

    pub fn hypothesis(&self, label: &str) -> Option<&ConstrainedRule> {
        let id = format!("{HYP_PREFIX}{label}");
        self.hypotheses.iter().find(|r| r.id() == id)
    }

    /// `E = ∅`.
    pub fn is_finished(&self) -> bool {
        self.equations.is_empty()
    }

    /// Every label in `E` and `H`.
    pub fn labels(&self) -> Vec<String> {
        self.equations
            .iter()
            .map(|e| e.label.clone())
            .chain(
                self.hypotheses
                    .iter()
                    .map(|r| r.id().strip_prefix(HYP_PREFIX).unwrap_or(r.id()).to_string()),
            )
            .collect()
    }

    /// Stable textual form used for digests.
    pub fn canonical_text(&self) -> String {
        let mut s = String::from("E:\n");
        for e in &self.equations {
            s.push_str(&format!("  {e}\n"));
        }
        s.push_str("H:\n");
        for r in &self.hypotheses {
            s.push_str(&format!("  {}: {r}\n", r.id()));
        }
        s
    }

    /// SHA-256 of [`Process::canonical_text`], hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let es: Vec<&str> = self.equations.iter().map(|e| e.label.as_str()).collect();
        let hs: Vec<String> = self
            .hypotheses
            .iter()
            .map(|r| r.id().strip_prefix(HYP_PREFIX).unwrap_or(r.id()).to_string())
            .collect();
        let set = |xs: &[String]| {
            if xs.is_empty() {
                "∅".to_string()
            } else {
                format!("{{{}}}", xs.join(", "))
            }
        };
        let es: Vec<String> = es.into_iter().map(str::to_string).collect();
        write!(f, "({}, {})", set(&es), set(&hs))
    }
}

impl Serialize for Process {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Process", 2)?;
        st.serialize_field("equations", &self.equations)?;
        let hyps: Vec<String> = self.hypotheses.iter().map(|r| format!("{}: {r}", r.id())).collect();
        st.serialize_field("hypotheses", &hyps)?;
        st.end()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RiError {
    #[error("no equation labelled {0}")]
    UnknownLabel(String),
    #[error("label {0} is already in use")]
    DuplicateLabel(String),
    #[error("position {position} is not a basic position of {term}")]
    NonBasic { position: Position, term: String },
    #[error("cannot orient {0} into a rewrite rule")]
    Unorientable(String),
    #[error("no rule with id {0}")]
    UnknownRule(String),
    #[error("expansion at {position} of {term} produced no equations")]
    NothingToExpand { position: Position, term: String },
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("simplification yields constraint {got}, not the requested {target}")]
    TargetMissed { target: String, got: String },
    #[error("{0} is not trivially true: the sides differ and the constraint is satisfiable")]
    NotDeletable(String),
    #[error("{rule}: side condition fails: {reason}")]
    SideCondition {
        rule: String,
        reason: String,
        counterexample: Option<Model>,
    },
    #[error("{rule}: side condition undecided: {reason}")]
    Unknown { rule: String, reason: String },
}

impl RiError {
    /// The step was blocked by an undecided solver query rather than refuted.
    pub fn is_unknown(&self) -> bool {
        match self {
            RiError::Unknown { .. } => true,
            RiError::Rewrite(e) => e.is_unknown(),
            _ => false,
        }
    }
}

/// The rewrite system and solver steps are checked against.
pub struct RiContext<'a> {
    /// `R`, e.g. `R_P ∪ R_check`.
    pub system: Lctrs,
    pub solver: &'a Solver,
    /// Canonical variables that state arguments are normalized back to.
    pub canon: Vec<Var>,
}

impl<'a> RiContext<'a> {
    pub fn new(system: Lctrs, solver: &'a Solver, canon: Vec<Var>) -> RiContext<'a> {
        RiContext { system, solver, canon }
    }

    /// A rule of `R`, of `H`, or a calculation rule `calc:<op>`.
    pub fn lookup_rule(&self, proc: &Process, id: &str) -> Result<ConstrainedRule, RiError> {
        if let Some(r) = self.system.rule(id) {
            return Ok(r.clone());
        }
        if let Some(r) = proc.hypotheses.iter().find(|r| r.id() == id) {
            return Ok(r.clone());
        }
        crate::lctrs::calc_rule(id).ok_or_else(|| RiError::UnknownRule(id.to_string()))
    }
}

/// `s ≈ t` as a term, so that steps inside an equation are ordinary
/// rewrite steps at positions `1.p` and `2.p`.
pub(crate) fn pair_term(e: &ConstrainedEquation) -> Term {
    let sort = e.lhs.sort();
    let sym: Arc<FunSym> = FunSym::new("≈", vec![sort.clone(), sort], Sort::Bool);
    Term::App(sym, vec![e.lhs.clone(), e.rhs.clone()])
}

/// Inverse of [`pair_term`].
pub(crate) fn unpair(label: String, t: &Term, constraint: Term) -> ConstrainedEquation {
    let args = t.args();
    ConstrainedEquation::new(label, args[0].clone(), args[1].clone(), constraint)
}
