//! Validity, satisfiability and equivalence of constraints.
//!
//! Queries go through a cache, ground evaluation, the built-in refuter, a
//! bounded model search and finally an external SMT-LIB2 solver. Every model
//! that reaches a caller has been re-checked by evaluation.

pub mod builtin;
pub mod poly;
pub mod smtlib;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;
use std::time::Duration;

use num_bigint::BigInt;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::terms::{Sort, Substitution, Term, Var};
use crate::theory::{build, eval_in, Value};

pub use smtlib::{SmtError, SmtSession};

/// Environment variable naming the external solver command.
pub const SOLVER_ENV: &str = "HOARE2RI_SOLVER";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// A valuation of the free variables of a query.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Model(pub BTreeMap<Var, Value>);

impl Model {
    pub fn to_substitution(&self) -> Substitution {
        Substitution::from_pairs(self.0.iter().map(|(v, val)| (v.clone(), Term::from_value(val))))
            .expect("values have the variable's sort")
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.iter().find(|(v, _)| v.name() == name).map(|(_, x)| x)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, val)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v} ↦ {val}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for Model {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (v, val) in &self.0 {
            m.serialize_entry(v.name(), val)?;
        }
        m.end()
    }
}

/// Result of a validity or equivalence query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "kebab-case")]
pub enum SolverVerdict {
    Valid,
    Invalid(Model),
    Unknown(String),
}

impl SolverVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, SolverVerdict::Valid)
    }
}

impl fmt::Display for SolverVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverVerdict::Valid => f.write_str("valid"),
            SolverVerdict::Invalid(m) => write!(f, "invalid, counterexample {m}"),
            SolverVerdict::Unknown(r) => write!(f, "unknown ({r})"),
        }
    }
}

/// Result of a satisfiability query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "kebab-case")]
pub enum SatVerdict {
    Sat(Model),
    Unsat,
    Unknown(String),
}

/// Which stage answered a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Cache,
    Ground,
    Builtin,
    Enumeration,
    External,
    None,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolverStats {
    pub queries: u64,
    pub cache_hits: u64,
    pub ground: u64,
    pub builtin: u64,
    pub enumeration: u64,
    pub external: u64,
    pub unknown: u64,
    /// Models that failed re-evaluation and were discarded.
    pub unconfirmed_models: u64,
    /// Models handed out after re-evaluation.
    pub confirmed_models: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    /// External solver command line; `None` disables the external stage.
    pub command: Option<Vec<String>>,
    pub timeout: Duration,
    /// Bound on the number of points tried by the model search.
    pub search_points: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: None,
            timeout: DEFAULT_TIMEOUT,
            search_points: 20_000,
        }
    }
}

impl SolverConfig {
    /// Only the internal stages.
    pub fn builtin() -> SolverConfig {
        SolverConfig::default()
    }

    /// Resolves the command: explicit flag, then the environment, then `z3` on `PATH`.
    pub fn resolve(flag: Option<&str>, timeout: Option<Duration>) -> SolverConfig {
        let cmd = flag
            .map(str::to_string)
            .or_else(|| std::env::var(SOLVER_ENV).ok())
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.split_whitespace().map(str::to_string).collect::<Vec<_>>())
            .or_else(|| find_on_path("z3").map(|p| vec![p, "-in".into()]));
        SolverConfig {
            command: cmd,
            timeout: timeout.unwrap_or(DEFAULT_TIMEOUT),
            ..SolverConfig::default()
        }
    }
}

fn find_on_path(prog: &str) -> Option<String> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join(prog))
        .find(|p| p.is_file())
        .map(|p| p.to_string_lossy().into_owned())
}

/// A solver front end. Safe to share; the external session is serialized.
pub struct Solver {
    config: SolverConfig,
    cache: Mutex<HashMap<String, (SatVerdict, Stage)>>,
    session: Mutex<Option<SmtSession>>,
    external_broken: Mutex<Option<String>>,
    stats: Mutex<SolverStats>,
}

impl fmt::Debug for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solver").field("config", &self.config).finish()
    }
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new(SolverConfig::default())
    }
}

impl Solver {
    pub fn new(config: SolverConfig) -> Solver {
        Solver {
            config,
            cache: Mutex::new(HashMap::new()),
            session: Mutex::new(None),
            external_broken: Mutex::new(None),
            stats: Mutex::new(SolverStats::default()),
        }
    }

    /// A solver that never launches a process.
    pub fn builtin() -> Solver {
        Solver::new(SolverConfig::builtin())
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn stats(&self) -> SolverStats {
        self.stats.lock().expect("stats lock").clone()
    }

    /// Why the external solver is not in use, if it was configured but failed.
    pub fn external_problem(&self) -> Option<String> {
        self.external_broken.lock().expect("lock").clone()
    }

    fn bump(&self, f: impl FnOnce(&mut SolverStats)) {
        f(&mut self.stats.lock().expect("stats lock"));
    }

    /// `φ` holds under every valuation.
    pub fn check_valid(&self, phi: &Term) -> SolverVerdict {
        match self.check_sat(&build::not(phi.clone())) {
            SatVerdict::Unsat => SolverVerdict::Valid,
            SatVerdict::Sat(m) => SolverVerdict::Invalid(m),
            SatVerdict::Unknown(r) => SolverVerdict::Unknown(r),
        }
    }

    /// `φ ⟺ ψ` is valid.
    pub fn check_equiv(&self, phi: &Term, psi: &Term) -> SolverVerdict {
        self.check_valid(&build::iff(phi.clone(), psi.clone()))
    }

    /// `φ ⟹ ψ` is valid.
    pub fn check_implies(&self, phi: &Term, psi: &Term) -> SolverVerdict {
        self.check_valid(&build::implies(phi.clone(), psi.clone()))
    }

    pub fn check_sat(&self, phi: &Term) -> SatVerdict {
        self.check_sat_staged(phi).0
    }

    /// Satisfiability together with the stage that decided it.
    pub fn check_sat_staged(&self, phi: &Term) -> (SatVerdict, Stage) {
        self.bump(|s| s.queries += 1);
        if phi.sort() != Sort::Bool || !phi.is_logical() {
            self.bump(|s| s.unknown += 1);
            return (
                SatVerdict::Unknown(format!("{phi} is not a constraint")),
                Stage::None,
            );
        }
        let key = cache_key(phi);
        if let Some((v, _)) = self.cache.lock().expect("cache lock").get(&key) {
            self.bump(|s| s.cache_hits += 1);
            return (v.clone(), Stage::Cache);
        }
        let (verdict, stage) = self.decide(phi);
        match stage {
            Stage::Ground => self.bump(|s| s.ground += 1),
            Stage::Builtin => self.bump(|s| s.builtin += 1),
            Stage::Enumeration => self.bump(|s| s.enumeration += 1),
            Stage::External => self.bump(|s| s.external += 1),
            Stage::Cache | Stage::None => {}
        }
        if matches!(verdict, SatVerdict::Unknown(_)) {
            self.bump(|s| s.unknown += 1);
        }
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, (verdict.clone(), stage));
        (verdict, stage)
    }

    fn decide(&self, phi: &Term) -> (SatVerdict, Stage) {
        if phi.is_ground() {
            return match eval_in(phi, &BTreeMap::new()) {
                Ok(Value::Bool(true)) => (SatVerdict::Sat(Model::default()), Stage::Ground),
                Ok(Value::Bool(false)) => (SatVerdict::Unsat, Stage::Ground),
                Ok(_) => (SatVerdict::Unknown("ill-sorted".into()), Stage::Ground),
                Err(e) => (SatVerdict::Unknown(e.to_string()), Stage::Ground),
            };
        }
        let mut reasons = Vec::new();
        match builtin::refute(phi) {
            builtin::Outcome::Unsat => return (SatVerdict::Unsat, Stage::Builtin),
            builtin::Outcome::Open => {}
            builtin::Outcome::GaveUp(r) => reasons.push(r),
        }
        if let Some(m) = self.search_model(phi) {
            return (SatVerdict::Sat(m), Stage::Enumeration);
        }
        match self.external(phi) {
            Some(Ok(v)) => return (v, Stage::External),
            Some(Err(r)) => reasons.push(r),
            None => reasons.push("no external solver configured".into()),
        }
        (
            SatVerdict::Unknown(format!("undecided: {}", reasons.join("; "))),
            Stage::None,
        )
    }

    /// Accepts a model only if it really satisfies `phi`.
    fn confirm(&self, phi: &Term, env: BTreeMap<Var, Value>) -> Option<Model> {
        if eval_in(phi, &env) == Ok(Value::Bool(true)) {
            self.bump(|s| s.confirmed_models += 1);
            Some(Model(env))
        } else {
            self.bump(|s| s.unconfirmed_models += 1);
            None
        }
    }

    /// Tries small values, nearest to zero first.
    fn search_model(&self, phi: &Term) -> Option<Model> {
        let vars: Vec<Var> = phi.vars().into_iter().collect();
        let ints = vars.iter().filter(|v| *v.sort() == Sort::Int).count() as u32;
        let bools = vars.len() as u32 - ints;
        let budget = self.config.search_points >> bools.min(16);
        // Largest radius r with (2r+1)^ints within budget.
        let mut r: i64 = 0;
        while ints > 0 && (2 * (r + 1) + 1).checked_pow(ints).is_some_and(|n| n as u64 <= budget) {
            r += 1;
            if r >= 64 {
                break;
            }
        }
        let candidates: Vec<i64> = std::iter::once(0)
            .chain((1..=r).flat_map(|k| [k, -k]))
            .collect();
        let n_int = candidates.len();
        let total_int = (n_int as u64).checked_pow(ints)?;
        for b in 0..(1u64 << bools) {
            for idx in 0..total_int {
                let mut env = BTreeMap::new();
                let (mut rest, mut bit) = (idx, 0);
                for v in &vars {
                    let val = if *v.sort() == Sort::Int {
                        let k = (rest % n_int as u64) as usize;
                        rest /= n_int as u64;
                        Value::Int(BigInt::from(candidates[k]))
                    } else {
                        let x = (b >> bit) & 1 == 1;
                        bit += 1;
                        Value::Bool(x)
                    };
                    env.insert(v.clone(), val);
                }
                if eval_in(phi, &env) == Ok(Value::Bool(true)) {
                    return self.confirm(phi, env);
                }
            }
        }
        None
    }

    fn external(&self, phi: &Term) -> Option<Result<SatVerdict, String>> {
        let cmd = self.config.command.as_ref()?;
        if let Some(problem) = self.external_problem() {
            return Some(Err(problem));
        }
        let mut guard = self.session.lock().expect("session lock");
        for attempt in 0..2 {
            if guard.is_none() {
                match SmtSession::start(cmd) {
                    Ok(s) => *guard = Some(s),
                    Err(e) => {
                        tracing::warn!("external solver unavailable: {e}");
                        *self.external_broken.lock().expect("lock") = Some(e.to_string());
                        return Some(Err(e.to_string()));
                    }
                }
            }
            let session = guard.as_mut().expect("session present");
            match session.check_sat(phi, self.config.timeout) {
                Ok(smtlib::SmtAnswer::Unsat) => return Some(Ok(SatVerdict::Unsat)),
                Ok(smtlib::SmtAnswer::Unknown(r)) => return Some(Ok(SatVerdict::Unknown(r))),
                Ok(smtlib::SmtAnswer::Sat(raw)) => {
                    let env = smtlib::model_for(phi, &raw);
                    return Some(Ok(match self.confirm(phi, env) {
                        Some(m) => SatVerdict::Sat(m),
                        None => SatVerdict::Unknown("solver model failed re-evaluation".into()),
                    }));
                }
                Err(SmtError::Unsupported(r)) => return Some(Err(r)),
                Err(e @ SmtError::Timeout) => {
                    // A stuck process is replaced for the next query.
                    *guard = None;
                    return Some(Ok(SatVerdict::Unknown(e.to_string())));
                }
                Err(e) => {
                    *guard = None;
                    if attempt == 1 {
                        return Some(Err(e.to_string()));
                    }
                }
            }
        }
        None
    }
}

fn cache_key(phi: &Term) -> String {
    let mut key = phi.to_string();
    for v in phi.vars() {
        key.push_str(&format!(" {}:{}", v.name(), v.sort()));
    }
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_constraint;

    fn c(s: &str) -> Term {
        parse_constraint(s).unwrap()
    }

    #[test]
    fn validity_examples() {
        let s = Solver::builtin();
        assert!(s.check_valid(&c("x >= 0 ==> x >= 0 && 0 = 0")).is_valid());
        assert!(s
            .check_valid(&c("2*z = i*(i+1) && x >= i && !(x > i) ==> 2*z = x*(x+1)"))
            .is_valid());
        match s.check_valid(&c("x > i")) {
            SolverVerdict::Invalid(m) => {
                assert_eq!(eval_in(&c("x > i"), &m.0), Ok(Value::Bool(false)))
            }
            other => panic!("expected invalid, got {other}"),
        }
    }

    #[test]
    fn satisfiability_examples() {
        let s = Solver::builtin();
        assert_eq!(s.check_sat(&Term::ff()), SatVerdict::Unsat);
        assert_eq!(s.check_sat(&c("x > x")), SatVerdict::Unsat);
        let phi = c("2*z = i*(i+1) && x >= i && x > i");
        match s.check_sat(&phi) {
            SatVerdict::Sat(m) => assert_eq!(eval_in(&phi, &m.0), Ok(Value::Bool(true))),
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn equivalence_examples() {
        let s = Solver::builtin();
        assert!(s.check_equiv(&c("x >= 0"), &c("x >= 0 && 0 = 0")).is_valid());
        assert!(matches!(
            s.check_equiv(&c("x > i"), &c("!(x > i)")),
            SolverVerdict::Invalid(_)
        ));
        assert!(s
            .check_equiv(&c("2*(z+i+1) = (i+1)*(i+2)"), &c("2*z+2*i+2 = i*i+3*i+2"))
            .is_valid());
    }

    #[test]
    fn cache_makes_answers_stable() {
        let s = Solver::builtin();
        let phi = c("x * y = 6 && x > y");
        let a = s.check_sat(&phi);
        let b = s.check_sat(&phi);
        assert_eq!(a, b);
        assert_eq!(s.stats().cache_hits, 1);
        assert_eq!(s.stats().unconfirmed_models, 0);
    }

    #[test]
    fn undecidable_without_external_is_unknown() {
        let s = Solver::builtin();
        // Needs a model far outside the search box.
        let phi = c("x * x = 1000000 && x > 0");
        assert!(matches!(s.check_sat(&phi), SatVerdict::Unknown(_)));
    }

    #[test]
    fn missing_external_solver_degrades() {
        let s = Solver::new(SolverConfig {
            command: Some(vec!["/nonexistent/solver".into()]),
            ..SolverConfig::default()
        });
        let phi = c("x * x = 1000000 && x > 0");
        assert!(matches!(s.check_sat(&phi), SatVerdict::Unknown(_)));
        assert!(s.external_problem().is_some());
        assert!(s.check_valid(&c("x > i || !(x > i)")).is_valid());
    }
}
