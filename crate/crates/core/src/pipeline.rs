//! Total correctness end to end: tableau check, transformation into a
//! rewriting-induction derivation, replay, and termination of the rules
//! the derivation relies on.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::convert::{convert, make_check_rules};
use crate::ri::{replay_sequence, Process, StepRecord};
use crate::solver::{Solver, SolverStats};
use crate::tableau::{check_tableau, Obligation, TableauError};
use crate::termination::{certify_program, lift_termination, LiftVerdict, ProgramTermination, Rank, SearchConfig};
use crate::transform::Transformer;
use crate::whilelang::WhileAst;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Proved,
    /// The program could not be converted.
    InputInvalid,
    TableauInvalid,
    /// A validated tableau did not yield a derivation.
    TransformFailed,
    Unknown,
}

impl Verdict {
    /// 0 proved, 1 refuted or invalid, 2 unknown.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Proved => 0,
            Verdict::InputInvalid | Verdict::TableauInvalid | Verdict::TransformFailed => 1,
            Verdict::Unknown => 2,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Proved => "proved",
            Verdict::InputInvalid => "input invalid",
            Verdict::TableauInvalid => "tableau invalid",
            Verdict::TransformFailed => "transform failed",
            Verdict::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageName {
    Convert,
    Tableau,
    Transform,
    Replay,
    Termination,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageStatus {
    Ok,
    Failed,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StageReport {
    pub stage: StageName,
    pub status: StageStatus,
    pub detail: String,
    pub millis: u128,
}

/// Everything `prove` found out about one tableau.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub verdict: Verdict,
    pub stages: Vec<StageReport>,
    pub obligations: Vec<Obligation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub proof: Vec<StepRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_process: Option<Process>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination: Option<ProgramTermination>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lift: Option<LiftVerdict>,
    pub solver: SolverStats,
}

impl PipelineReport {
    pub fn stage(&self, name: StageName) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Ranking expressions by loop header line.
    pub ranks: BTreeMap<usize, Rank>,
    pub search: SearchConfig,
}

struct Recorder {
    stages: Vec<StageReport>,
    clock: Instant,
}

impl Recorder {
    fn done(&mut self, stage: StageName, status: StageStatus, detail: impl Into<String>) {
        self.stages.push(StageReport {
            stage,
            status,
            detail: detail.into(),
            millis: self.clock.elapsed().as_millis(),
        });
        self.clock = Instant::now();
    }
}

/// Runs every stage on an annotated program, stopping at the first one
/// that does not succeed.
pub fn total_correctness(ast: &WhileAst, solver: &Solver, opts: &PipelineOptions) -> PipelineReport {
    let mut rec = Recorder {
        stages: Vec::new(),
        clock: Instant::now(),
    };
    let mut report = PipelineReport {
        verdict: Verdict::Unknown,
        stages: Vec::new(),
        obligations: Vec::new(),
        proof: Vec::new(),
        final_process: None,
        termination: None,
        lift: None,
        solver: SolverStats::default(),
    };
    let finish = |mut report: PipelineReport, rec: Recorder, verdict: Verdict| {
        report.verdict = verdict;
        report.stages = rec.stages;
        report.solver = solver.stats();
        report
    };

    let (r, cmap) = match convert(ast) {
        Ok(x) => {
            rec.done(StageName::Convert, StageStatus::Ok, format!("{} rules", x.0.rules().len()));
            x
        }
        Err(e) => {
            rec.done(StageName::Convert, StageStatus::Failed, e.to_string());
            return finish(report, rec, Verdict::InputInvalid);
        }
    };

    match check_tableau(ast, solver) {
        Ok(t) => {
            report.obligations = t.obligations().to_vec();
            let warnings = t.warnings().count();
            rec.done(
                StageName::Tableau,
                StageStatus::Ok,
                format!("{} obligations discharged, {warnings} warning(s)", t.obligations().len()),
            );
        }
        Err(e) => {
            report.obligations = crate::tableau::check_all(ast, solver);
            let (status, verdict) = match e {
                TableauError::Violated(_) => (StageStatus::Failed, Verdict::TableauInvalid),
                TableauError::Undecided(_) => (StageStatus::Unknown, Verdict::Unknown),
            };
            rec.done(StageName::Tableau, status, e.to_string());
            return finish(report, rec, verdict);
        }
    }

    let transformer = match Transformer::new(ast, solver) {
        Ok(t) => t,
        Err(e) => {
            rec.done(StageName::Transform, StageStatus::Failed, e.to_string());
            return finish(report, rec, Verdict::TransformFailed);
        }
    };
    let transformation = match transformer.trans() {
        Ok(t) => {
            rec.done(
                StageName::Transform,
                StageStatus::Ok,
                format!("{} inference steps, final process {}", t.steps.len(), t.final_process()),
            );
            t
        }
        Err(e) => {
            let (status, verdict) = if e.is_unknown() {
                (StageStatus::Unknown, Verdict::Unknown)
            } else {
                (StageStatus::Failed, Verdict::TransformFailed)
            };
            rec.done(StageName::Transform, status, e.to_string());
            return finish(report, rec, verdict);
        }
    };
    report.proof = transformation.trace();
    report.final_process = Some(transformation.final_process().clone());

    match replay_sequence(
        transformer.context(),
        &transformation.start,
        &transformation.inference_steps(),
    ) {
        Ok(p) if p.is_finished() => rec.done(StageName::Replay, StageStatus::Ok, format!("replayed to {p}")),
        Ok(p) => {
            rec.done(StageName::Replay, StageStatus::Failed, format!("ends in {p} with equations left"));
            return finish(report, rec, Verdict::TransformFailed);
        }
        Err(e) => {
            let status = StageStatus::Failed;
            rec.done(StageName::Replay, status, e.to_string());
            return finish(report, rec, Verdict::TransformFailed);
        }
    }

    let program = match certify_program(solver, &r, &cmap, ast, &opts.ranks, &opts.search) {
        Ok(p) => p,
        Err(e) => {
            rec.done(StageName::Termination, StageStatus::Failed, e.to_string());
            return finish(report, rec, Verdict::Unknown);
        }
    };
    let post = ast.assertions().last().expect("validated tableau").1.clone();
    let check = make_check_rules(&post, &cmap).expect("check rules of a converted program");
    let lift = lift_termination(
        Some(&program),
        check.rules(),
        &transformation.final_process().hypotheses,
    );
    let verdict = if lift.is_terminating() {
        rec.done(StageName::Termination, StageStatus::Ok, "R_P ∪ R_check ∪ H is terminating");
        Verdict::Proved
    } else {
        let LiftVerdict::Unknown { reason } = &lift else { unreachable!() };
        rec.done(StageName::Termination, StageStatus::Unknown, reason.clone());
        Verdict::Unknown
    };
    report.termination = Some(program);
    report.lift = Some(lift);
    finish(report, rec, verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolverConfig;
    use crate::whilelang::parse_program;

    fn fixture(name: &str) -> WhileAst {
        let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
        parse_program(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    fn solver() -> Solver {
        Solver::new(SolverConfig::resolve(None, None))
    }

    #[test]
    fn sum_is_proved() {
        let s = solver();
        let r = total_correctness(&fixture("sum.whl"), &s, &PipelineOptions::default());
        assert_eq!(r.verdict, Verdict::Proved, "{:#?}", r.stages);
        assert_eq!(r.final_process.as_ref().unwrap().hypotheses.len(), 1);
        assert_eq!(r.solver.unconfirmed_models, 0);
    }

    #[test]
    fn not_equal_variant_is_unknown() {
        let s = solver();
        let r = total_correctness(&fixture("sum_neq.whl"), &s, &PipelineOptions::default());
        assert_eq!(r.verdict, Verdict::Unknown, "{:#?}", r.stages);
        assert_eq!(r.stage(StageName::Transform).unwrap().status, StageStatus::Ok);
        assert_eq!(r.stage(StageName::Termination).unwrap().status, StageStatus::Unknown);
    }

    #[test]
    fn false_post_condition_is_invalid() {
        let s = solver();
        let src = std::fs::read_to_string(format!("{}/../../fixtures/sum.whl", env!("CARGO_MANIFEST_DIR"))).unwrap();
        let src = src.replace("@ z = 1/2 * x * (x + 1);", "@ false;");
        let r = total_correctness(&parse_program(&src).unwrap(), &s, &PipelineOptions::default());
        assert_eq!(r.verdict, Verdict::TableauInvalid);
        assert!(r.obligations.iter().any(|o| o.status.is_violated()));
    }

    /// Overwriting a variable the assertions do not mention leaves an
    /// existential behind, whose generated name must survive replay.
    #[test]
    fn overwritten_variables_replay() {
        let s = solver();
        let src = "@ y + 3 >= y;\ny := y - 3 * z;\n@ y + 3 >= y;\nz := x - y - 2 * z;\n@ y + 3 >= y;\n";
        let r = total_correctness(&parse_program(src).unwrap(), &s, &PipelineOptions::default());
        assert_eq!(r.verdict, Verdict::Proved, "{:#?}", r.stages);
    }

    #[test]
    fn if_and_nested_fixtures_are_proved() {
        let s = solver();
        for f in ["max.whl", "nested.whl"] {
            let r = total_correctness(&fixture(f), &s, &PipelineOptions::default());
            assert_eq!(r.verdict, Verdict::Proved, "{f}: {:#?}", r.stages);
        }
    }
}
