//! Expansion, Simplification, Deletion, CaseSplitting and Generalization.
//!
//! Every constructor re-checks its own side condition, and replay goes
//! through the same constructors, so a recorded step is only as trusted as
//! its re-execution.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{pair_term, unpair, ConstrainedEquation, Process, RiContext, RiError, HYP_PREFIX};
use crate::lctrs::{base_step, basic_positions, normalize_ct, rewrite_constrained, ConstrainedRule, ConstrainedTerm, NormStep, Origin};
use crate::solver::{SatVerdict, SolverVerdict};
use crate::terms::{unify, Position, Term};
use crate::theory::build;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceRule {
    Expansion,
    Simplification,
    Deletion,
    CaseSplitting,
    Generalization,
}

impl fmt::Display for InferenceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InferenceRule::Expansion => "Expansion",
            InferenceRule::Simplification => "Simplification",
            InferenceRule::Deletion => "Deletion",
            InferenceRule::CaseSplitting => "CaseSplitting",
            InferenceRule::Generalization => "Generalization",
        })
    }
}

/// Which side of `s ≈ t` a step works on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    #[default]
    Left,
    Right,
}

impl Side {
    fn index(self) -> usize {
        match self {
            Side::Left => 1,
            Side::Right => 2,
        }
    }

    fn pick(self, e: &ConstrainedEquation) -> (&Term, &Term) {
        match self {
            Side::Left => (&e.lhs, &e.rhs),
            Side::Right => (&e.rhs, &e.lhs),
        }
    }
}

/// Position `side.p` inside the pair term of an equation.
fn in_pair(side: Side, p: &Position) -> Position {
    let mut v = vec![side.index()];
    v.extend(&p.0);
    Position(v)
}

/// The parameters that determine a step's result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepParams {
    Expansion {
        side: Side,
        position: Position,
        /// Labels for the new equations; default `L.1`, `L.2`, ….
        labels: Option<Vec<String>>,
    },
    CaseSplitting {
        side: Side,
        position: Position,
        labels: Option<Vec<String>>,
    },
    Simplification {
        side: Side,
        position: Position,
        rule: String,
        /// Preferred representation of the resulting constraint.
        target: Option<Term>,
        /// Label of the result; default keeps the old label.
        label: Option<String>,
    },
    Deletion,
    Generalization {
        constraint: Term,
        label: Option<String>,
    },
}

impl StepParams {
    pub fn rule(&self) -> InferenceRule {
        match self {
            StepParams::Expansion { .. } => InferenceRule::Expansion,
            StepParams::CaseSplitting { .. } => InferenceRule::CaseSplitting,
            StepParams::Simplification { .. } => InferenceRule::Simplification,
            StepParams::Deletion => InferenceRule::Deletion,
            StepParams::Generalization { .. } => InferenceRule::Generalization,
        }
    }
}

/// One application of an inference rule, with the processes around it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InferenceStep {
    /// Label of the equation the rule was applied to.
    pub target: String,
    pub params: StepParams,
    pub before: Process,
    pub after: Process,
    /// Labels of the equations this step added to `E`.
    pub produced: Vec<String>,
    /// How the result of a rewrite step was brought into canonical form.
    pub normalization: Vec<NormStep>,
    /// Simplification was given a target constraint and reached it.
    pub reached_target: bool,
}

impl InferenceStep {
    pub fn rule(&self) -> InferenceRule {
        self.params.rule()
    }

    /// `Rule target -> produced`, e.g. `Expansion A6 -> A7,A11`.
    pub fn summary(&self) -> String {
        format!("{} {} -> {}", self.rule(), self.target, self.produced.join(","))
    }

    /// The equations this step added.
    pub fn produced_equations(&self) -> Vec<&ConstrainedEquation> {
        self.produced.iter().filter_map(|l| self.after.equation(l)).collect()
    }
}

fn take<'p>(proc: &'p Process, label: &str) -> Result<(usize, &'p ConstrainedEquation), RiError> {
    proc.equations
        .iter()
        .enumerate()
        .find(|(_, e)| e.label == label)
        .ok_or_else(|| RiError::UnknownLabel(label.to_string()))
}

/// `proc` with the equation at `k` replaced by `new`. `E` is a set: a new
/// equation equal up to its label to one already present is absorbed.
fn replace(proc: &Process, k: usize, new: Vec<ConstrainedEquation>) -> Result<Process, RiError> {
    let removed = &proc.equations[k].label;
    let existing = proc.labels();
    for e in &new {
        if e.label != *removed && existing.contains(&e.label) {
            return Err(RiError::DuplicateLabel(e.label.clone()));
        }
    }
    let mut kept: Vec<ConstrainedEquation> = Vec::new();
    for e in new {
        let e = e.canonical_names();
        let present = proc
            .equations
            .iter()
            .enumerate()
            .any(|(j, old)| j != k && old.same_content(&e))
            || kept.iter().any(|old| old.same_content(&e));
        if !present {
            kept.push(e);
        }
    }
    let mut equations = proc.equations.clone();
    equations.splice(k..=k, kept);
    Ok(Process {
        equations,
        hypotheses: proc.hypotheses.clone(),
    })
}

/// `Expd_R(s ≈ t [φ], p)` on the chosen side.
pub fn expd(
    ctx: &RiContext,
    eq: &ConstrainedEquation,
    side: Side,
    p: &Position,
    labels: Option<&[String]>,
) -> Result<Vec<ConstrainedEquation>, RiError> {
    let (s, _) = side.pick(eq);
    if !basic_positions(&ctx.system, s).contains(p) {
        return Err(RiError::NonBasic {
            position: p.clone(),
            term: s.to_string(),
        });
    }
    let sub = s.subterm_at(p).expect("basic positions exist");
    let mut out = Vec::new();
    for rule in ctx.system.rules() {
        let variant = rule.renamed();
        let Some(gamma) = unify(sub, variant.lhs()) else {
            continue;
        };
        let inst = eq.apply(&gamma);
        let constraint = build::and(inst.constraint.clone(), variant.guard().apply(&gamma));
        let ct = ConstrainedTerm::new(pair_term(&inst), constraint);
        let stepped = base_step(ctx.solver, &ct, &variant, &in_pair(side, p))?;
        let norm = normalize_ct(ctx.solver, &stepped, &ctx.canon, None);
        let label = match labels.and_then(|ls| ls.get(out.len())) {
            Some(l) => l.clone(),
            None => format!("{}.{}", eq.label, out.len() + 1),
        };
        out.push(unpair(label, &norm.ct.term, norm.ct.constraint));
    }
    if out.is_empty() {
        return Err(RiError::NothingToExpand {
            position: p.clone(),
            term: s.to_string(),
        });
    }
    Ok(out)
}

fn expand(
    ctx: &RiContext,
    proc: &Process,
    label: &str,
    side: Side,
    p: &Position,
    labels: Option<&[String]>,
    orient: bool,
) -> Result<InferenceStep, RiError> {
    let (k, eq) = take(proc, label)?;
    let mut hyp = None;
    if orient {
        let (s, t) = side.pick(eq);
        let id = format!("{HYP_PREFIX}{label}");
        if proc.hypotheses.iter().any(|r| r.id() == id) {
            return Err(RiError::DuplicateLabel(label.to_string()));
        }
        let rule = ConstrainedRule::new(
            id,
            s.clone(),
            t.clone(),
            eq.constraint.clone(),
            Origin::Hypothesis { label: label.to_string() },
        )
        .map_err(|e| RiError::Unorientable(format!("{}: {e}", eq.body())))?;
        hyp = Some(rule);
    }
    let new = expd(ctx, eq, side, p, labels)?;
    let mut after = replace(proc, k, new.clone())?;
    let produced = new
        .iter()
        .filter(|e| after.equation(&e.label).is_some())
        .map(|e| e.label.clone())
        .collect();
    after.hypotheses.extend(hyp);
    let params = if orient {
        StepParams::Expansion {
            side,
            position: p.clone(),
            labels: labels.map(<[String]>::to_vec),
        }
    } else {
        StepParams::CaseSplitting {
            side,
            position: p.clone(),
            labels: labels.map(<[String]>::to_vec),
        }
    };
    Ok(InferenceStep {
        target: label.to_string(),
        params,
        before: proc.clone(),
        after,
        produced,
        normalization: Vec::new(),
        reached_target: false,
    })
}

/// Expansion: replaces the equation by its expansions and adds it to `H`
/// oriented from the chosen side. Termination of `R ∪ H` is not checked
/// here; it is certified for the whole derivation afterwards.
pub fn apply_expansion(
    ctx: &RiContext,
    proc: &Process,
    label: &str,
    side: Side,
    p: &Position,
    labels: Option<&[String]>,
) -> Result<InferenceStep, RiError> {
    expand(ctx, proc, label, side, p, labels, true)
}

/// CaseSplitting: Expansion without adding a hypothesis.
pub fn apply_case_splitting(
    ctx: &RiContext,
    proc: &Process,
    label: &str,
    side: Side,
    p: &Position,
    labels: Option<&[String]>,
) -> Result<InferenceStep, RiError> {
    expand(ctx, proc, label, side, p, labels, false)
}

/// Simplification: one constrained rewrite step with a rule of `R`, `H`
/// or a calculation rule, on either side.
#[allow(clippy::too_many_arguments)]
pub fn apply_simplification(
    ctx: &RiContext,
    proc: &Process,
    label: &str,
    side: Side,
    q: &Position,
    rule_id: &str,
    target: Option<&Term>,
    new_label: Option<&str>,
) -> Result<InferenceStep, RiError> {
    let (k, eq) = take(proc, label)?;
    let rule = ctx.lookup_rule(proc, rule_id)?;
    let ct = ConstrainedTerm::new(pair_term(eq), eq.constraint.clone());
    let out = rewrite_constrained(ctx.solver, &ct, &rule, &in_pair(side, q), &ctx.canon, target)?;
    if let (Some(t), false) = (target, out.reached_target) {
        return Err(RiError::TargetMissed {
            target: t.to_string(),
            got: out.ct.constraint.to_string(),
        });
    }
    let result_label = new_label.unwrap_or(label).to_string();
    let new = unpair(result_label.clone(), &out.ct.term, out.ct.constraint);
    let after = replace(proc, k, vec![new])?;
    let produced = after.equation(&result_label).map(|_| result_label.clone()).into_iter().collect();
    Ok(InferenceStep {
        target: label.to_string(),
        params: StepParams::Simplification {
            side,
            position: q.clone(),
            rule: rule_id.to_string(),
            target: target.cloned(),
            label: new_label.map(str::to_string),
        },
        before: proc.clone(),
        after,
        produced,
        normalization: out.steps,
        reached_target: out.reached_target,
    })
}

/// Deletion: the sides are identical or the constraint is unsatisfiable.
pub fn apply_deletion(ctx: &RiContext, proc: &Process, label: &str) -> Result<InferenceStep, RiError> {
    let (k, eq) = take(proc, label)?;
    if eq.lhs != eq.rhs {
        match ctx.solver.check_sat(&eq.constraint) {
            SatVerdict::Unsat => {}
            SatVerdict::Sat(_) => return Err(RiError::NotDeletable(eq.body())),
            SatVerdict::Unknown(reason) => {
                return Err(RiError::Unknown {
                    rule: "Deletion".into(),
                    reason,
                })
            }
        }
    }
    let after = replace(proc, k, Vec::new())?;
    Ok(InferenceStep {
        target: label.to_string(),
        params: StepParams::Deletion,
        before: proc.clone(),
        after,
        produced: Vec::new(),
        normalization: Vec::new(),
        reached_target: false,
    })
}

/// Generalization: replaces `φ` by `ψ` when `φ ⟹ ψ` is valid.
pub fn apply_generalization(
    ctx: &RiContext,
    proc: &Process,
    label: &str,
    psi: &Term,
    new_label: Option<&str>,
) -> Result<InferenceStep, RiError> {
    let (k, eq) = take(proc, label)?;
    match ctx.solver.check_implies(&eq.constraint, psi) {
        SolverVerdict::Valid => {}
        SolverVerdict::Invalid(m) => {
            return Err(RiError::SideCondition {
                rule: "Generalization".into(),
                reason: format!("{} does not imply {psi}", eq.constraint),
                counterexample: Some(m),
            })
        }
        SolverVerdict::Unknown(reason) => {
            return Err(RiError::Unknown {
                rule: "Generalization".into(),
                reason,
            })
        }
    }
    let result_label = new_label.unwrap_or(label).to_string();
    let mut new = eq.clone();
    new.label = result_label.clone();
    new.constraint = psi.clone();
    let after = replace(proc, k, vec![new])?;
    let produced = after.equation(&result_label).map(|_| result_label.clone()).into_iter().collect();
    Ok(InferenceStep {
        target: label.to_string(),
        params: StepParams::Generalization {
            constraint: psi.clone(),
            label: new_label.map(str::to_string),
        },
        before: proc.clone(),
        after,
        produced,
        normalization: Vec::new(),
        reached_target: false,
    })
}

/// Applies the rule described by `params` to `label`.
pub fn apply_step(ctx: &RiContext, proc: &Process, label: &str, params: &StepParams) -> Result<InferenceStep, RiError> {
    match params {
        StepParams::Expansion { side, position, labels } => {
            apply_expansion(ctx, proc, label, *side, position, labels.as_deref())
        }
        StepParams::CaseSplitting { side, position, labels } => {
            apply_case_splitting(ctx, proc, label, *side, position, labels.as_deref())
        }
        StepParams::Simplification {
            side,
            position,
            rule,
            target,
            label: new_label,
        } => apply_simplification(ctx, proc, label, *side, position, rule, target.as_ref(), new_label.as_deref()),
        StepParams::Deletion => apply_deletion(ctx, proc, label),
        StepParams::Generalization { constraint, label: new_label } => {
            apply_generalization(ctx, proc, label, constraint, new_label.as_deref())
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("step {index} ({rule} on {target}): {reason}")]
pub struct ReplayMismatch {
    pub index: usize,
    pub rule: InferenceRule,
    pub target: String,
    pub reason: String,
}

/// Re-executes `steps` from `start`, checking each recorded process.
pub fn replay_sequence(ctx: &RiContext, start: &Process, steps: &[InferenceStep]) -> Result<Process, ReplayMismatch> {
    let mut cur = start.clone();
    for (index, step) in steps.iter().enumerate() {
        let fail = |reason: String| ReplayMismatch {
            index,
            rule: step.rule(),
            target: step.target.clone(),
            reason,
        };
        if step.before != cur {
            return Err(fail(format!("recorded process {} differs from the current {}", step.before, cur)));
        }
        let again = apply_step(ctx, &cur, &step.target, &step.params).map_err(|e| fail(e.to_string()))?;
        if again.after != step.after {
            return Err(fail(format!(
                "re-execution yields {} instead of the recorded {}",
                again.after.canonical_text(),
                step.after.canonical_text()
            )));
        }
        cur = again.after;
    }
    Ok(cur)
}
