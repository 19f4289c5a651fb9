//! JSON proof traces: one record per step, with digests of the processes
//! before and after, replayable against the rewrite system.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rules::{apply_step, InferenceRule, InferenceStep, ReplayMismatch, Side, StepParams};
use super::{Process, RiContext};
use crate::syntax::parse_constraint;
use crate::terms::Position;

/// Serialized form of an [`InferenceStep`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub rule: InferenceRule,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<String>,
    /// Rewrite rule used by Simplification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
    /// Target constraint of Simplification, or the new constraint of Generalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<String>,
    /// Labels given to the produced equations.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    /// Produced equations, for reading; not used by replay.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub produced: Vec<String>,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("record {index}: {reason}")]
    Malformed { index: usize, reason: String },
    #[error(transparent)]
    Mismatch(#[from] ReplayMismatch),
    #[error("invalid JSON: {0}")]
    Json(String),
}

/// SHA-256 digest of a process.
pub fn digest_of(p: &Process) -> String {
    p.digest()
}

fn record(index: usize, step: &InferenceStep) -> StepRecord {
    let mut r = StepRecord {
        index,
        rule: step.rule(),
        target: step.target.clone(),
        side: None,
        position: None,
        rule_id: None,
        constraint: None,
        labels: Vec::new(),
        produced: step.produced_equations().iter().map(|e| e.to_string()).collect(),
        before: step.before.digest(),
        after: step.after.digest(),
    };
    match &step.params {
        StepParams::Expansion { side, position, labels } | StepParams::CaseSplitting { side, position, labels } => {
            r.side = Some(*side);
            r.position = Some(position.to_string());
            r.labels = labels.clone().unwrap_or_default();
        }
        StepParams::Simplification {
            side,
            position,
            rule,
            target,
            label,
        } => {
            r.side = Some(*side);
            r.position = Some(position.to_string());
            r.rule_id = Some(rule.clone());
            r.constraint = target.as_ref().map(|t| t.to_string());
            r.labels = label.iter().cloned().collect();
        }
        StepParams::Deletion => {}
        StepParams::Generalization { constraint, label } => {
            r.constraint = Some(constraint.to_string());
            r.labels = label.iter().cloned().collect();
        }
    }
    r
}

/// The trace records of a derivation.
pub fn write_trace(steps: &[InferenceStep]) -> Vec<StepRecord> {
    steps.iter().enumerate().map(|(k, s)| record(k, s)).collect()
}

/// Parses a JSON trace.
pub fn read_trace(json: &str) -> Result<Vec<StepRecord>, TraceError> {
    serde_json::from_str(json).map_err(|e| TraceError::Json(e.to_string()))
}

fn params_of(r: &StepRecord) -> Result<StepParams, TraceError> {
    let bad = |reason: String| TraceError::Malformed { index: r.index, reason };
    let position = || -> Result<Position, TraceError> {
        r.position
            .as_deref()
            .ok_or_else(|| bad("missing position".into()))?
            .parse()
            .map_err(bad)
    };
    let constraint = |text: &str| parse_constraint(text).map_err(|e| bad(format!("constraint {text}: {e}")));
    let labels = (!r.labels.is_empty()).then(|| r.labels.clone());
    let single = r.labels.first().cloned();
    Ok(match r.rule {
        InferenceRule::Expansion => StepParams::Expansion {
            side: r.side.unwrap_or_default(),
            position: position()?,
            labels,
        },
        InferenceRule::CaseSplitting => StepParams::CaseSplitting {
            side: r.side.unwrap_or_default(),
            position: position()?,
            labels,
        },
        InferenceRule::Simplification => StepParams::Simplification {
            side: r.side.unwrap_or_default(),
            position: position()?,
            rule: r.rule_id.clone().ok_or_else(|| bad("missing rule id".into()))?,
            target: r.constraint.as_deref().map(constraint).transpose()?,
            label: single,
        },
        InferenceRule::Deletion => StepParams::Deletion,
        InferenceRule::Generalization => StepParams::Generalization {
            constraint: constraint(r.constraint.as_deref().ok_or_else(|| bad("missing constraint".into()))?)?,
            label: single,
        },
    })
}

/// Rebuilds and re-checks every step of a trace from `start`; digests
/// must agree with the recorded ones.
pub fn replay_trace(
    ctx: &RiContext,
    start: &Process,
    records: &[StepRecord],
) -> Result<(Vec<InferenceStep>, Process), TraceError> {
    let mut cur = start.clone();
    let mut steps = Vec::new();
    for (index, r) in records.iter().enumerate() {
        let fail = |reason: String| {
            TraceError::Mismatch(ReplayMismatch {
                index,
                rule: r.rule,
                target: r.target.clone(),
                reason,
            })
        };
        if r.before != cur.digest() {
            return Err(fail("digest of the process before the step differs".into()));
        }
        let params = params_of(r)?;
        let step = apply_step(ctx, &cur, &r.target, &params).map_err(|e| fail(e.to_string()))?;
        if r.after != step.after.digest() {
            return Err(fail(format!("re-execution yields a different process {}", step.after)));
        }
        cur = step.after.clone();
        steps.push(step);
    }
    Ok((steps, cur))
}
