//! Abstraction state and the solver queries shared by verification and
//! class exploration.

use std::collections::{BTreeSet, HashSet};

use super::encode::{observation_eq, observation_of, read_vectors};
use crate::cache::{AttackModel, Observation};
use crate::program::{secret_var_name, Assignment, ProgramError};
use crate::smt::{minimize_core, Answer, Backend, Model, Session, SolverError, Term};
use crate::symbolic::{guard_var, miss_var, PredId, SymbolicError, SymbolicSystem};

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solver gave no answer for query `{query}`: {reason}")]
    Unknown { query: String, reason: String },
    #[error("refinement stuck: spurious trace without new predicates in its core")]
    Stuck,
}

impl VerifyError {
    /// Errors that end a run with an inconclusive verdict rather than a failure.
    pub fn is_inconclusive(&self) -> bool {
        matches!(self, VerifyError::Unknown { .. } | VerifyError::Stuck)
    }
}

/// Tracked predicates and the rounds that added them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Abstraction {
    pub tracked: BTreeSet<PredId>,
    pub initial: usize,
    /// Predicates added by each refinement, in order.
    pub history: Vec<Vec<PredId>>,
}

impl Abstraction {
    pub fn new(initial: BTreeSet<PredId>) -> Abstraction {
        Abstraction { initial: initial.len(), tracked: initial, history: Vec::new() }
    }

    /// Adds the predicates of `core`; fails unless at least one is new.
    pub fn refine(&mut self, core: &BTreeSet<PredId>) -> Result<Vec<PredId>, VerifyError> {
        let fresh: Vec<PredId> = core.difference(&self.tracked).copied().collect();
        if fresh.is_empty() {
            return Err(VerifyError::Stuck);
        }
        self.tracked.extend(fresh.iter().copied());
        self.history.push(fresh.clone());
        Ok(fresh)
    }

    pub fn rounds(&self) -> usize {
        self.history.len()
    }
}

/// Per-access miss and guard values of one model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawTrace {
    pub misses: Vec<bool>,
    pub guards: Vec<bool>,
}

impl RawTrace {
    pub fn observation(&self, model: AttackModel) -> Observation {
        observation_of(model, &self.misses, &self.guards)
    }
}

/// A trace realized by a concrete secret assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CexTrace {
    pub trace: RawTrace,
    pub observation: Observation,
    pub witness: Assignment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(CexTrace),
    /// Predicates whose definitions take part in the refutation.
    Spurious(BTreeSet<PredId>),
}

fn def_label(p: &PredId) -> String {
    format!("d{}", &p.var_name()["rho".len()..])
}

fn label_pred(label: &str) -> Option<PredId> {
    format!("rho{}", label.strip_prefix('d')?).parse().ok()
}

/// Assumption literal fixing miss (`m`) or guard (`g`) variable `i` to `v`.
fn fact_label(kind: char, i: usize, v: bool) -> String {
    format!("{kind}{}.{i}", u8::from(v))
}

/// Solver state for one program, cache and attack model.
///
/// One incremental session holds psi, the definitions of the tracked
/// predicates and the negated exclusions as permanent assertions. Every
/// other definition sits behind its own assumption literal, so that a
/// feasibility check is a check under assumptions whose core names the
/// predicates needed to refute a trace.
pub struct Engine<'a> {
    pub sys: SymbolicSystem,
    pub model: AttackModel,
    pub abstraction: Abstraction,
    /// Conditions whose models are no longer of interest.
    exclusions: Vec<Term>,
    session: Box<dyn Session + 'a>,
    facts: HashSet<String>,
    queries: usize,
}

impl<'a> Engine<'a> {
    /// Starts from the statically determined predicates.
    pub fn new(sys: SymbolicSystem, model: AttackModel, backend: &'a dyn Backend) -> Result<Engine<'a>, VerifyError> {
        let abstraction = Abstraction::new(sys.initial_abstraction());
        let mut session = backend.session(&format!("engine-{model}"))?;
        session.assert_all(&sys.psi)?;
        let tracked: Vec<Term> = abstraction.tracked.iter().map(|p| sys.def_constraint(p)).collect();
        session.assert_all(&tracked)?;
        for p in &sys.universe {
            if !abstraction.tracked.contains(p) {
                session.assert_labeled(&def_label(p), &sys.def_constraint(p))?;
            }
        }
        Ok(Engine { sys, model, abstraction, exclusions: Vec::new(), session, facts: HashSet::new(), queries: 0 })
    }

    /// Solver checks issued so far.
    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn exclusions(&self) -> &[Term] {
        &self.exclusions
    }

    /// Removes the models satisfying `cond` from all later queries.
    pub fn exclude(&mut self, cond: Term) -> Result<(), VerifyError> {
        self.session.assert_all(&[cond.not()])?;
        self.exclusions.push(cond);
        Ok(())
    }

    fn check(&mut self, assumptions: &[String], tag: &str) -> Result<bool, VerifyError> {
        self.queries += 1;
        let ans = self.session.check(assumptions)?;
        match ans {
            Answer::Sat => Ok(true),
            Answer::Unsat => Ok(false),
            Answer::Unknown(reason) => {
                Err(VerifyError::Unknown { query: format!("{tag}-r{}", self.abstraction.rounds()), reason })
            }
        }
    }

    fn read_trace(&mut self, extra: &[String]) -> Result<(RawTrace, Model), VerifyError> {
        let n = self.sys.len();
        let mut names: Vec<String> = (1..=n).flat_map(|i| [format!("miss.{i}"), format!("guard.{i}")]).collect();
        names.extend(extra.iter().cloned());
        let m = self.session.values(&names)?;
        let (misses, guards) =
            read_vectors(&m, n).ok_or_else(|| SolverError::Protocol("model lacks miss or guard values".into()))?;
        Ok((RawTrace { misses, guards }, m))
    }

    /// A model of the abstract system, outside the exclusions, that also
    /// satisfies `extra`.
    pub fn abstract_trace(&mut self, extra: &[Term], tag: &str) -> Result<Option<RawTrace>, VerifyError> {
        self.session.push()?;
        let result = self.abstract_trace_in_scope(extra, tag);
        if !matches!(result, Err(VerifyError::Unknown { .. })) {
            self.session.pop()?;
        }
        result
    }

    fn abstract_trace_in_scope(&mut self, extra: &[Term], tag: &str) -> Result<Option<RawTrace>, VerifyError> {
        self.session.assert_all(extra)?;
        if !self.check(&[], tag)? {
            return Ok(None);
        }
        Ok(Some(self.read_trace(&[])?.0))
    }

    /// Two abstract traces with different observations, if any exist.
    pub fn property_query(&mut self) -> Result<Option<(RawTrace, RawTrace)>, VerifyError> {
        let Some(first) = self.abstract_trace(&[], "property-1")? else {
            return Ok(None);
        };
        let differ = observation_eq(&first.observation(self.model), self.sys.len()).not();
        let Some(second) = self.abstract_trace(&[differ], "property-2")? else {
            return Ok(None);
        };
        Ok(Some((first, second)))
    }

    fn fact(&mut self, kind: char, i: usize, v: bool) -> Result<String, VerifyError> {
        let label = fact_label(kind, i, v);
        if !self.facts.contains(&label) {
            let var = if kind == 'm' { miss_var(i) } else { guard_var(i) };
            let lit = if v { var } else { var.not() };
            self.session.assert_labeled(&label, &lit)?;
            self.facts.insert(label.clone());
        }
        Ok(label)
    }

    /// Checks `tr` against the full cache semantics. Under the trace model,
    /// and always when `fix_guards` is set, the guards are part of the trace.
    pub fn feasibility_check(&mut self, tr: &RawTrace, fix_guards: bool) -> Result<Feasibility, VerifyError> {
        let n = self.sys.len();
        // predicate labels come first so that core shrinking drops them first
        let mut assumptions: Vec<String> =
            self.sys.universe.iter().filter(|p| !self.abstraction.tracked.contains(p)).map(def_label).collect();
        let untracked = assumptions.len();
        for i in 1..=n {
            assumptions.push(self.fact('m', i, tr.misses[i - 1])?);
        }
        if fix_guards || self.model == AttackModel::Trace {
            for i in 1..=n {
                assumptions.push(self.fact('g', i, tr.guards[i - 1])?);
            }
        }
        if self.check(&assumptions, "feasibility")? {
            let secrets: Vec<String> = self.sys.trace.secrets.iter().map(|s| secret_var_name(&s.name)).collect();
            let (trace, m) = self.read_trace(&secrets)?;
            let witness = Assignment::from_model(&self.sys.trace.secrets, |name| m.get(name));
            let observation = trace.observation(self.model);
            return Ok(Feasibility::Feasible(CexTrace { trace, observation, witness }));
        }
        let core = self.session.core()?;
        let mut counted = Counted { inner: self.session.as_mut(), checks: 0 };
        // only predicate labels matter for refinement; the trace facts stay fixed
        let (preds, facts) = assumptions.split_at(untracked);
        let core = minimize_core(&mut counted, preds, &core, facts);
        self.queries += counted.checks;
        let core = core?;
        Ok(Feasibility::Spurious(core.iter().filter_map(|l| label_pred(l)).collect()))
    }

    /// Tracks the predicates of `core` from now on.
    pub fn refine(&mut self, core: &BTreeSet<PredId>) -> Result<Vec<PredId>, VerifyError> {
        let added = self.abstraction.refine(core)?;
        let defs: Vec<Term> = added.iter().map(|p| self.sys.def_constraint(p)).collect();
        self.session.assert_all(&defs)?;
        Ok(added)
    }

    /// A feasible trace satisfying `extra` outside the exclusions, refining
    /// the abstraction on every spurious candidate.
    pub fn concrete_trace(&mut self, extra: &[Term], tag: &str) -> Result<Option<CexTrace>, VerifyError> {
        loop {
            let Some(tr) = self.abstract_trace(extra, tag)? else {
                return Ok(None);
            };
            match self.feasibility_check(&tr, true)? {
                Feasibility::Feasible(c) => return Ok(Some(c)),
                Feasibility::Spurious(core) => {
                    self.refine(&core)?;
                }
            }
        }
    }

    /// Condition on the secrets that holds exactly for the inputs that
    /// execute the accesses of `tr` and miss where `tr` misses.
    pub fn monitor(&self, tr: &RawTrace) -> Term {
        let mut parts = Vec::new();
        for i in 0..self.sys.len() {
            parts.push(self.sys.ground_guard[i].eq_to(&Term::bool(tr.guards[i])));
            if tr.guards[i] {
                parts.push(self.sys.ground_gamma[i].eq_to(&Term::bool(tr.misses[i])));
            }
        }
        Term::and(parts)
    }

    /// The guard and miss vector of this system equals that of `tr`, on
    /// executed accesses for the misses.
    pub fn trace_eq(&self, tr: &RawTrace) -> Term {
        let mut parts = Vec::new();
        for i in 1..=self.sys.len() {
            let g = tr.guards[i - 1];
            parts.push(if g { guard_var(i) } else { guard_var(i).not() });
            if g {
                parts.push(if tr.misses[i - 1] { miss_var(i) } else { miss_var(i).not() });
            }
        }
        Term::and(parts)
    }

    /// `observation = o` over this system.
    pub fn observation_eq(&self, o: &Observation) -> Term {
        observation_eq(o, self.sys.len())
    }
}

/// Counts the checks of a borrowed session.
struct Counted<'s, 'a> {
    inner: &'s mut (dyn Session + 'a),
    checks: usize,
}

impl Session for Counted<'_, '_> {
    fn assert_all(&mut self, ts: &[Term]) -> Result<(), SolverError> {
        self.inner.assert_all(ts)
    }

    fn assert_labeled(&mut self, label: &str, t: &Term) -> Result<(), SolverError> {
        self.inner.assert_labeled(label, t)
    }

    fn push(&mut self) -> Result<(), SolverError> {
        self.inner.push()
    }

    fn pop(&mut self) -> Result<(), SolverError> {
        self.inner.pop()
    }

    fn check(&mut self, assumptions: &[String]) -> Result<Answer, SolverError> {
        self.checks += 1;
        self.inner.check(assumptions)
    }

    fn values(&mut self, names: &[String]) -> Result<Model, SolverError> {
        self.inner.values(names)
    }

    fn core(&mut self) -> Result<Vec<String>, SolverError> {
        self.inner.core()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        let p = PredId::tag(3, 4);
        assert_eq!(def_label(&p), "d.tag.3.4");
        assert_eq!(label_pred("d.tag.3.4"), Some(p));
        assert_eq!(label_pred("m1.4"), None);
        assert_eq!(fact_label('g', 4, false), "g0.4");
    }

    #[test]
    fn refine_requires_new_predicates() {
        let mut ab = Abstraction::new(BTreeSet::from([PredId::set(1, 2)]));
        assert!(matches!(ab.refine(&BTreeSet::new()), Err(VerifyError::Stuck)));
        assert!(matches!(ab.refine(&BTreeSet::from([PredId::set(1, 2)])), Err(VerifyError::Stuck)));
        let added = ab.refine(&BTreeSet::from([PredId::set(1, 2), PredId::tag(1, 2)])).unwrap();
        assert_eq!(added, vec![PredId::tag(1, 2)]);
        assert_eq!(ab.tracked.len(), 2);
        assert_eq!(ab.rounds(), 1);
        assert_eq!(ab.initial, 1);
    }
}
