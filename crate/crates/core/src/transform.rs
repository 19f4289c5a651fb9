//! Translation of a validated proof tableau into a rewriting-induction
//! derivation of `chk(start(x⃗)) ≈ true [pre]`.
//!
//! The tableau is consumed from the top. Each call of [`Transformer::trans1`]
//! looks at the assertion at the head of the remaining lines and the line
//! after it, picks the one matching case, and emits the corresponding
//! inference steps through the checked constructors of [`crate::ri`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::convert::{convert, make_check_rules, make_goal, ConversionMap, ConvertError};
use crate::lctrs::RuleError;
use crate::ri::{
    apply_case_splitting, apply_deletion, apply_expansion, apply_generalization, apply_simplification, write_trace,
    ConstrainedEquation, InferenceRule, InferenceStep, Process, ReplayMismatch, RiContext, RiError, Side, StepParams,
    StepRecord,
};
use crate::solver::Solver;
use crate::terms::{Position, Term};
use crate::whilelang::{Block, Command, Line, WhileAst};

/// Which shape of tableau lines a `trans1` call consumed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransCase {
    ContinuousAssertions,
    Assignment,
    Skip,
    WhileBegin,
    WhileEnd,
    IfBegin,
    ElseBegin,
    IfEnd,
    EndOfTableau,
}

impl std::fmt::Display for TransCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransCase::ContinuousAssertions => "two continuous assertions",
            TransCase::Assignment => "assignment",
            TransCase::Skip => "skip",
            TransCase::WhileBegin => "beginning of while",
            TransCase::WhileEnd => "end of while",
            TransCase::IfBegin => "beginning of if",
            TransCase::ElseBegin => "beginning of else",
            TransCase::IfEnd => "end of if",
            TransCase::EndOfTableau => "end of tableau",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransformError {
    #[error("the program has no assertions")]
    NotATableau,
    #[error("line {line}: no case applies: {reason}")]
    NoCase { line: usize, reason: String },
    #[error("line {line} ({case}): {source}")]
    Step {
        line: usize,
        case: TransCase,
        #[source]
        source: RiError,
    },
    #[error(transparent)]
    Convert(#[from] ConvertError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("replay of the emitted steps failed: {0}")]
    Replay(#[from] ReplayMismatch),
}

impl TransformError {
    /// A step was blocked by an undecided solver query.
    pub fn is_unknown(&self) -> bool {
        matches!(self, TransformError::Step { source, .. } if source.is_unknown())
    }
}

/// One inference step together with the tableau lines that caused it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransStep {
    pub case: TransCase,
    /// The assertion line at the head of the remaining tableau.
    pub line: usize,
    pub step: InferenceStep,
}

/// The remaining tableau, the current process and what has been emitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransState {
    /// Index into the tableau lines where the remaining suffix starts.
    pub cursor: usize,
    pub proc: Process,
    pub emitted: Vec<TransStep>,
    next_fresh: usize,
    /// Loop header line to the label of its hypothesis.
    loop_hyps: BTreeMap<usize, String>,
}

impl TransState {
    /// Number of tableau lines not yet consumed.
    pub fn remaining(&self, ast: &WhileAst) -> usize {
        ast.lines().len().saturating_sub(self.cursor)
    }
}

/// The result of [`Transformer::trans`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transformation {
    pub start: Process,
    pub steps: Vec<TransStep>,
    /// The process after each `trans1` call, starting with `start`.
    pub processes: Vec<Process>,
}

impl Transformation {
    pub fn inference_steps(&self) -> Vec<InferenceStep> {
        self.steps.iter().map(|s| s.step.clone()).collect()
    }

    pub fn final_process(&self) -> &Process {
        self.processes.last().unwrap_or(&self.start)
    }

    pub fn trace(&self) -> Vec<StepRecord> {
        write_trace(&self.inference_steps())
    }

    pub fn count(&self, rule: InferenceRule) -> usize {
        self.steps.iter().filter(|s| s.step.rule() == rule).count()
    }
}

/// Holds the rewrite system `R_P ∪ R_check` built from a tableau.
pub struct Transformer<'a> {
    ast: WhileAst,
    cmap: ConversionMap,
    ctx: RiContext<'a>,
    labels: BTreeMap<usize, String>,
    goal: ConstrainedEquation,
}

fn state_position() -> Position {
    Position::root().child(1)
}

fn assertion(line: &Line) -> Option<&Term> {
    match &line.command {
        Command::Assert { cond } => Some(cond),
        _ => None,
    }
}

impl<'a> Transformer<'a> {
    pub fn new(ast: &WhileAst, solver: &'a Solver) -> Result<Transformer<'a>, TransformError> {
        let pre = ast.assertions().next().ok_or(TransformError::NotATableau)?.1.clone();
        let post = ast.assertions().last().expect("nonempty").1.clone();
        let (r, cmap) = convert(ast)?;
        let chk = make_check_rules(&post, &cmap)?;
        let labels = ast.assertion_labels();
        let mut goal = make_goal(&pre, &cmap);
        goal.label = labels.values().next().expect("nonempty").clone();
        let ctx = RiContext::new(r.union(&chk)?, solver, cmap.vars().to_vec());
        Ok(Transformer {
            ast: ast.clone(),
            cmap,
            ctx,
            labels,
            goal,
        })
    }

    pub fn context(&self) -> &RiContext<'a> {
        &self.ctx
    }

    pub fn conversion_map(&self) -> &ConversionMap {
        &self.cmap
    }

    pub fn ast(&self) -> &WhileAst {
        &self.ast
    }

    /// `e_P`, labelled like the first assertion.
    pub fn goal(&self) -> &ConstrainedEquation {
        &self.goal
    }

    /// `(T_P, {e_P}, ∅)`.
    pub fn initial(&self) -> TransState {
        TransState {
            cursor: 0,
            proc: Process::start(vec![self.goal.clone()]),
            emitted: Vec::new(),
            next_fresh: 1,
            loop_hyps: BTreeMap::new(),
        }
    }

    fn line_at(&self, k: usize) -> Option<&Line> {
        self.ast.lines().get(k)
    }

    fn index_of(&self, number: usize) -> usize {
        self.ast
            .lines()
            .iter()
            .position(|l| l.number == number)
            .expect("line exists")
    }

    /// The assertion right after line `number`, with its label.
    fn assertion_after(&self, number: usize) -> Result<(String, Term), TransformError> {
        let k = self.index_of(number);
        self.line_at(k + 1)
            .and_then(|l| assertion(l).map(|c| (self.labels[&l.number].clone(), c.clone())))
            .ok_or_else(|| TransformError::NoCase {
                line: number,
                reason: "expected an assertion on the next line".into(),
            })
    }

    /// Label of the unique equation whose left side is `chk(state_line(…))`.
    fn equation_at(&self, proc: &Process, line: usize) -> Result<String, TransformError> {
        let found: Vec<&ConstrainedEquation> = proc
            .equations
            .iter()
            .filter(|e| {
                e.lhs
                    .args()
                    .first()
                    .and_then(Term::root_fun)
                    .and_then(|f| self.cmap.line_of(f.name()))
                    == Some(line)
            })
            .collect();
        match found.as_slice() {
            [e] => Ok(e.label.clone()),
            [] => Err(TransformError::NoCase {
                line,
                reason: format!("no equation is at the state of line {line} in {proc}"),
            }),
            _ => Err(TransformError::NoCase {
                line,
                reason: format!("several equations are at the state of line {line}"),
            }),
        }
    }

    /// Consumes the head of the remaining tableau.
    pub fn trans1(&self, mut st: TransState) -> Result<TransState, TransformError> {
        let head = self.line_at(st.cursor).ok_or(TransformError::NoCase {
            line: self.ast.end_line(),
            reason: "the tableau is exhausted".into(),
        })?;
        let at = head.number;
        if assertion(head).is_none() {
            return Err(TransformError::NoCase {
                line: at,
                reason: "the remaining tableau does not start with an assertion".into(),
            });
        }
        let next = self.line_at(st.cursor + 1).expect("the blank line follows every assertion");
        let current_line = self.ast.next_command(at).expect("a blank line ends the program");
        let current = self.equation_at(&st.proc, current_line)?;
        let mut em = Emitter {
            tr: self,
            st: &mut st,
            line: at,
            case: TransCase::ContinuousAssertions,
        };
        let consumed = match &next.command {
            Command::Assert { cond } => {
                em.case = TransCase::ContinuousAssertions;
                let label = if self.is_last_assertion(next.number) {
                    em.fresh()
                } else {
                    self.labels[&next.number].clone()
                };
                em.generalize(&current, cond, &label)?;
                1
            }
            Command::Assign { .. } | Command::Skip => {
                em.case = if matches!(next.command, Command::Skip) {
                    TransCase::Skip
                } else {
                    TransCase::Assignment
                };
                let (label, psi) = self.assertion_after(next.number)?;
                let label = if self.is_last_assertion_label(&label) { em.fresh() } else { label };
                em.simplify_to(&current, &format!("l{}", next.number), state_position(), &psi, &label)?;
                2
            }
            Command::WhileOpen { .. } => {
                em.case = TransCase::WhileBegin;
                let Some(Block::While { close, .. }) = self.ast.block(next.number) else {
                    unreachable!("while lines open while blocks")
                };
                let (body_label, body_phi) = self.assertion_after(next.number)?;
                let (exit_label, exit_phi) = self.assertion_after(close)?;
                let order = self.branch_order(next.number, &format!("l{}+", next.number));
                let mut labels = vec![body_label.clone(), exit_label.clone()];
                if !order {
                    labels.reverse();
                }
                em.push(apply_expansion(
                    &self.ctx,
                    &em.st.proc,
                    &current,
                    Side::Left,
                    &state_position(),
                    Some(&labels),
                ))?;
                em.st.loop_hyps.insert(next.number, current.clone());
                em.align(&body_label, &body_phi)?;
                em.align(&exit_label, &exit_phi)?;
                2
            }
            Command::IfOpen { .. } => {
                em.case = TransCase::IfBegin;
                let Some(Block::If { else_line, .. }) = self.ast.block(next.number) else {
                    unreachable!("if lines open if blocks")
                };
                let (then_label, then_phi) = self.assertion_after(next.number)?;
                let (else_label, else_phi) = self.assertion_after(else_line)?;
                let order = self.branch_order(next.number, &format!("l{}+", next.number));
                let mut labels = vec![then_label.clone(), else_label.clone()];
                if !order {
                    labels.reverse();
                }
                em.push(apply_case_splitting(
                    &self.ctx,
                    &em.st.proc,
                    &current,
                    Side::Left,
                    &state_position(),
                    Some(&labels),
                ))?;
                em.align(&then_label, &then_phi)?;
                em.align(&else_label, &else_phi)?;
                2
            }
            Command::ElseOpen => {
                em.case = TransCase::ElseBegin;
                let Some(Block::If { close, .. }) = self.ast.block_of(next.number) else {
                    unreachable!("else belongs to an if")
                };
                let (_, join_phi) = self.assertion_after(close)?;
                let label = em.fresh();
                em.simplify_to(&current, &format!("l{}", next.number), state_position(), &join_phi, &label)?;
                2
            }
            Command::Close => match self.ast.block_of(next.number) {
                Some(Block::While { open, .. }) => {
                    em.case = TransCase::WhileEnd;
                    let hyp = em.st.loop_hyps.get(&open).cloned().ok_or_else(|| TransformError::NoCase {
                        line: next.number,
                        reason: format!("no hypothesis for the loop at line {open}"),
                    })?;
                    let back = em.fresh();
                    em.push(apply_simplification(
                        &self.ctx,
                        &em.st.proc,
                        &current,
                        Side::Left,
                        &state_position(),
                        &format!("l{}", next.number),
                        None,
                        Some(&back),
                    ))?;
                    let closed = em.fresh();
                    em.push(apply_simplification(
                        &self.ctx,
                        &em.st.proc,
                        &back,
                        Side::Left,
                        &Position::root(),
                        &format!("{}{hyp}", crate::ri::HYP_PREFIX),
                        None,
                        Some(&closed),
                    ))?;
                    em.push(apply_deletion(&self.ctx, &em.st.proc, &closed))?;
                    2
                }
                Some(Block::If { .. }) => {
                    em.case = TransCase::IfEnd;
                    let (_, join_phi) = self.assertion_after(next.number)?;
                    let label = em.fresh();
                    em.simplify_to(&current, &format!("l{}", next.number), state_position(), &join_phi, &label)?;
                    2
                }
                None => {
                    return Err(TransformError::NoCase {
                        line: next.number,
                        reason: "closing brace without a block".into(),
                    })
                }
            },
            Command::Blank => {
                em.case = TransCase::EndOfTableau;
                let done = em.fresh();
                em.push(apply_simplification(
                    &self.ctx,
                    &em.st.proc,
                    &current,
                    Side::Left,
                    &Position::root(),
                    "chk+",
                    None,
                    Some(&done),
                ))?;
                em.push(apply_deletion(&self.ctx, &em.st.proc, &done))?;
                2
            }
        };
        st.cursor += consumed;
        Ok(st)
    }

    /// Whether the rule `first` comes before its sibling in `R`, i.e. the
    /// order in which Expansion produces the branches.
    fn branch_order(&self, open: usize, first: &str) -> bool {
        let sym = self.cmap.symbol(open).map(|f| f.name().to_string());
        self.ctx
            .system
            .rules()
            .iter()
            .find(|r| r.root_symbol().map(|f| f.name().to_string()) == sym)
            .map(|r| r.id() == first)
            .unwrap_or(true)
    }

    fn is_last_assertion(&self, number: usize) -> bool {
        self.labels.keys().next_back() == Some(&number)
    }

    fn is_last_assertion_label(&self, label: &str) -> bool {
        self.labels.values().next_back().map(String::as_str) == Some(label)
    }

    /// `Trans(T_P, {e_P}, ∅)`.
    pub fn trans(&self) -> Result<Transformation, TransformError> {
        let mut st = self.initial();
        let start = st.proc.clone();
        let mut processes = vec![start.clone()];
        while st.cursor < self.ast.lines().len() - 1 {
            let before = st.remaining(&self.ast);
            st = self.trans1(st)?;
            debug_assert!(st.remaining(&self.ast) < before);
            processes.push(st.proc.clone());
        }
        Ok(Transformation {
            start,
            steps: st.emitted,
            processes,
        })
    }
}

/// Emits steps for one `trans1` call.
struct Emitter<'t, 'a> {
    tr: &'t Transformer<'a>,
    st: &'t mut TransState,
    line: usize,
    case: TransCase,
}

impl Emitter<'_, '_> {
    fn fresh(&mut self) -> String {
        loop {
            let label = format!("B{}", self.st.next_fresh);
            self.st.next_fresh += 1;
            if !self.tr.labels.values().any(|l| *l == label) {
                return label;
            }
        }
    }

    fn push(&mut self, r: Result<InferenceStep, RiError>) -> Result<(), TransformError> {
        let step = r.map_err(|source| TransformError::Step {
            line: self.line,
            case: self.case,
            source,
        })?;
        self.st.proc = step.after.clone();
        self.st.emitted.push(TransStep {
            case: self.case,
            line: self.line,
            step,
        });
        Ok(())
    }

    fn generalize(&mut self, label: &str, psi: &Term, new_label: &str) -> Result<(), TransformError> {
        let step = apply_generalization(&self.tr.ctx, &self.st.proc, label, psi, Some(new_label));
        self.push(step)
    }

    /// Rewrites the equation's constraint to `psi` if it is not already `psi`.
    fn align(&mut self, label: &str, psi: &Term) -> Result<(), TransformError> {
        match self.st.proc.equation(label) {
            Some(e) if e.constraint != *psi => self.generalize(label, psi, label),
            _ => Ok(()),
        }
    }

    /// Simplification aiming at `psi`, followed by Generalization when the
    /// normalized constraint is not literally `psi`.
    fn simplify_to(
        &mut self,
        label: &str,
        rule: &str,
        position: Position,
        psi: &Term,
        new_label: &str,
    ) -> Result<(), TransformError> {
        let step = apply_simplification(
            &self.tr.ctx,
            &self.st.proc,
            label,
            Side::Left,
            &position,
            rule,
            Some(psi),
            Some(new_label),
        );
        if !matches!(step, Err(RiError::TargetMissed { .. })) {
            return self.push(step);
        }
        // Redo without a target under a fresh label, then generalize.
        let tmp = self.fresh();
        self.push(apply_simplification(
            &self.tr.ctx,
            &self.st.proc,
            label,
            Side::Left,
            &position,
            rule,
            None,
            Some(&tmp),
        ))?;
        if self.st.proc.equation(&tmp).is_some() {
            self.generalize(&tmp, psi, new_label)?;
        }
        Ok(())
    }
}

/// Equations of a process, one per line, as in the worked narration.
pub fn render_process(p: &Process) -> String {
    let mut s = String::new();
    if p.equations.is_empty() {
        s.push_str("  E = ∅\n");
    }
    for e in &p.equations {
        let _ = writeln!(s, "  ({})  {}", e.label, e.body());
    }
    let hs: Vec<String> = p.labels().into_iter().skip(p.equations.len()).collect();
    if hs.is_empty() {
        s.push_str("  H = ∅\n");
    } else {
        let _ = writeln!(s, "  H = {{{}}}", hs.join(", "));
    }
    s
}

fn describe(ast: &WhileAst, ts: &TransStep) -> String {
    let step = &ts.step;
    let next = ast.next_command(ts.line).and_then(|n| ast.line(n));
    let line_text = |l: &Line| crate::whilelang::print_numbered(ast).lines().find_map(|t| {
        let (num, rest) = t.trim_start().split_once(' ')?;
        (num.trim_end_matches(':') == l.number.to_string()).then(|| rest.trim().to_string())
    });
    let what = match &step.params {
        StepParams::Generalization { constraint, .. } => format!(
            "we can generalize ({}) to the constraint {} by applying Generalization",
            step.target, constraint
        ),
        StepParams::Expansion { .. } => format!("we apply Expansion to ({}), orienting it into H", step.target),
        StepParams::CaseSplitting { .. } => format!("we apply CaseSplitting to ({})", step.target),
        StepParams::Simplification { rule, .. } => {
            let shown = rule.clone();
            format!("we can simplify ({}) with rule {} by applying Simplification", step.target, shown)
        }
        StepParams::Deletion => format!("both sides of ({}) coincide and we delete it by applying Deletion", step.target),
    };
    let ctx = match (ts.case, next) {
        (TransCase::ContinuousAssertions, _) => {
            let n = ast.lines().iter().skip_while(|l| l.number != ts.line).nth(1);
            match n.and_then(|l| line_text(l).map(|t| (l.number, t))) {
                Some((n, t)) => format!("Line {n} of the tableau is the assertion {t}"),
                None => "The next line is an assertion".into(),
            }
        }
        (TransCase::EndOfTableau, _) => "The tableau ends with the post-condition".into(),
        (case, Some(l)) => match line_text(l) {
            Some(t) => format!("Line {} ({case}) is {t}", l.number),
            None => format!("Line {} ({case})", l.number),
        },
        (case, None) => format!("At the {case}"),
    };
    format!("{ctx}, and {what}:")
}

/// Step-by-step account of a transformation.
pub fn narrate(ast: &WhileAst, t: &Transformation) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "We start from the goal:");
    s.push_str(&render_process(&t.start));
    for ts in &t.steps {
        let _ = writeln!(s, "\n{}", describe(ast, ts));
        s.push_str(&render_process(&ts.step.after));
    }
    let _ = writeln!(s, "\nThe final process is {}.", t.final_process());
    s
}
