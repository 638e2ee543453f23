//! Class exploration: enumerate every observation class of a program with
//! a symbolic monitor per class, then synthesize patches that merge them.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde_json::json;

use super::model::{Patch, PatchFix};
use super::synth::{synthesize, SynthError};
use crate::cache::{bits_to_string, AttackModel, CacheConfig, Observation};
use crate::program::{unroll, Assignment, Program, Secret};
use crate::smt::{Backend, SharedForm, Term};
use crate::symbolic::execute_symbolic;
use crate::verify::{CexTrace, Engine, RawTrace, VerifyError};

/// One feasible trace of a class and the inputs that produce it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub trace: RawTrace,
    /// Holds exactly for the inputs whose run has this guard and miss vector.
    pub monitor: Term,
    pub witness: Assignment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassEntry {
    pub observation: Observation,
    pub members: Vec<Member>,
}

impl ClassEntry {
    /// Disjunction of the member monitors.
    pub fn nu(&self) -> Term {
        Term::or(self.members.iter().map(|m| m.monitor.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExplorationStatus {
    /// Every input belongs to some explored class.
    Complete,
    /// Stopped early; the explored classes and their members are exact
    /// but other inputs may be missing.
    Partial { reason: String },
}

#[derive(Debug, Clone)]
pub struct MonitoringOutcome {
    pub program: String,
    pub config: CacheConfig,
    pub model: AttackModel,
    pub secrets: Vec<Secret>,
    /// Classes in exploration order.
    pub classes: Vec<ClassEntry>,
    pub status: ExplorationStatus,
    /// Anchor patch first, then one per other class in exploration order.
    /// Empty when fewer than two classes were found.
    pub patches: Vec<Patch>,
    /// Observation every patched input shows.
    pub reference: Option<Observation>,
    /// Index in `classes` of the class the others are merged into.
    pub anchor: Option<usize>,
    pub tracked: usize,
    pub universe: usize,
    pub queries: usize,
    pub elapsed: Duration,
}

#[derive(Debug, thiserror::Error)]
pub enum MonitorError {
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl MonitoringOutcome {
    pub fn is_complete(&self) -> bool {
        self.status == ExplorationStatus::Complete
    }

    /// Number of class merges the full patch set performs.
    pub fn merges(&self) -> usize {
        self.patches.len().saturating_sub(1)
    }

    /// Patches performing the first `k` merges: the anchor's patch and the
    /// patches of the first `k` other classes. Each merge joins one more
    /// class to the reference, so the class count drops by exactly `k`.
    pub fn merge_prefix(&self, k: usize) -> &[Patch] {
        if k == 0 {
            return &[];
        }
        &self.patches[..(k + 1).min(self.patches.len())]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "program {}", self.program);
        let _ = writeln!(out, "cache {}", self.config);
        let _ = writeln!(out, "model {}", self.model);
        match &self.status {
            ExplorationStatus::Complete => {
                let _ = writeln!(out, "exploration complete");
            }
            ExplorationStatus::Partial { reason } => {
                let _ = writeln!(out, "exploration partial");
                let _ = writeln!(out, "reason {reason}");
            }
        }
        let _ = writeln!(out, "classes {}", self.classes.len());
        for (k, c) in self.classes.iter().enumerate() {
            let _ = writeln!(out, "class {} observation={} traces={}", k + 1, c.observation, c.members.len());
            for m in &c.members {
                let _ = writeln!(
                    out,
                    "  trace misses={} guards={} witness {}",
                    bits_to_string(&m.trace.misses),
                    bits_to_string(&m.trace.guards),
                    m.witness.describe(&self.secrets)
                );
            }
        }
        match &self.reference {
            Some(r) if !self.patches.is_empty() => {
                let _ = writeln!(out, "reference {r}");
            }
            _ if self.is_complete() => {
                let _ = writeln!(out, "note verified: a single class needs no patches");
            }
            _ => {}
        }
        for p in &self.patches {
            let o = p.observation.as_ref().map(|o| o.to_string()).unwrap_or_default();
            let _ = writeln!(out, "patch {o} {}", p.describe_fix());
        }
        let _ = writeln!(out, "tracked {}", self.tracked);
        let _ = writeln!(out, "universe {}", self.universe);
        let _ = writeln!(out, "queries {}", self.queries);
        let _ = writeln!(out, "wall_time {:.3}s", self.elapsed.as_secs_f64());
        out
    }

    /// Machine-readable report without timing.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "program": self.program,
            "cache": self.config,
            "model": self.model,
            "complete": self.is_complete(),
            "reason": match &self.status {
                ExplorationStatus::Complete => None,
                ExplorationStatus::Partial { reason } => Some(reason),
            },
            "classes": self.classes.iter().map(|c| json!({
                "observation": c.observation.to_string(),
                "monitor": SharedForm::from_term(&c.nu()),
                "traces": c.members.iter().map(|m| json!({
                    "misses": bits_to_string(&m.trace.misses),
                    "guards": bits_to_string(&m.trace.guards),
                    "witness": m.witness.describe(&self.secrets),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "reference": self.reference.as_ref().map(|r| r.to_string()),
            "patches": self.patches.iter().map(|p| json!({
                "observation": p.observation.as_ref().map(|o| o.to_string()),
                "fix": p.describe_fix(),
            })).collect::<Vec<_>>(),
            "tracked": self.tracked,
            "universe": self.universe,
            "queries": self.queries,
        })
    }
}

/// Explores the observation classes of `p` and patches them into one.
///
/// Each round finds a feasible trace outside the explored classes, then
/// collects every feasible trace with the same observation. A trace's
/// guard and miss vector is excluded from all later queries once found, so
/// no trace is reported twice and every input it covers is accounted for:
/// the full semantics give each input exactly one vector. Spurious candidates refine the abstraction. Solver
/// timeouts and stuck refinement end the exploration early; the classes
/// found so far are still patched.
pub fn run_monitoring(
    p: &Program,
    cfg: &CacheConfig,
    model: AttackModel,
    backend: &dyn Backend,
) -> Result<MonitoringOutcome, MonitorError> {
    let start = Instant::now();
    let trace = unroll(p).map_err(VerifyError::from)?;
    let sys = execute_symbolic(&trace, cfg).map_err(VerifyError::from)?;
    let universe = sys.universe.len();
    let mut engine = Engine::new(sys, model, backend)?;
    let mut classes = Vec::new();
    let status = match explore(&mut engine, &mut classes) {
        Ok(()) => ExplorationStatus::Complete,
        Err(e) if e.is_inconclusive() => ExplorationStatus::Partial { reason: e.to_string() },
        Err(e) => return Err(e.into()),
    };

    let (patches, reference, anchor) = if classes.len() < 2 {
        (Vec::new(), classes.first().map(|c: &ClassEntry| c.observation.clone()), None)
    } else {
        let input: Vec<(Term, Observation)> = classes.iter().map(|c| (c.nu(), c.observation.clone())).collect();
        let (mut patches, reference) = synthesize(&input)?;
        let anchor = anchor_index(&patches, reference.as_ref());
        let first = patches.remove(anchor);
        patches.insert(0, first);
        (patches, reference, Some(anchor))
    };
    Ok(MonitoringOutcome {
        program: p.name.clone(),
        config: *cfg,
        model,
        secrets: p.secrets.clone(),
        classes,
        status,
        patches,
        reference,
        anchor,
        tracked: engine.abstraction.tracked.len(),
        universe,
        queries: engine.queries(),
        elapsed: start.elapsed(),
    })
}

/// The class whose patch leaves it unchanged, or the first class when every
/// class has to move to the reference.
fn anchor_index(patches: &[Patch], reference: Option<&Observation>) -> usize {
    patches
        .iter()
        .position(|p| p.observation.as_ref() == reference && p.is_identity())
        .or_else(|| patches.iter().position(|p| matches!(p.fix, PatchFix::Delta(0))))
        .unwrap_or(0)
}

fn explore(engine: &mut Engine<'_>, classes: &mut Vec<ClassEntry>) -> Result<(), VerifyError> {
    loop {
        let differ: Vec<Term> = classes.iter().map(|c| engine.observation_eq(&c.observation).not()).collect();
        let Some(seed) = engine.concrete_trace(&differ, "next-class")? else {
            return Ok(());
        };
        let same = engine.observation_eq(&seed.observation);
        classes.push(ClassEntry { observation: seed.observation.clone(), members: Vec::new() });
        let entry = classes.last_mut().expect("just pushed");
        add_member(engine, entry, seed)?;
        while let Some(next) = engine.concrete_trace(std::slice::from_ref(&same), "same-class")? {
            add_member(engine, entry, next)?;
        }
    }
}

fn add_member(engine: &mut Engine<'_>, entry: &mut ClassEntry, c: CexTrace) -> Result<(), VerifyError> {
    let monitor = engine.monitor(&c.trace);
    engine.exclude(engine.trace_eq(&c.trace))?;
    entry.members.push(Member { trace: c.trace, monitor, witness: c.witness });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{oracle_classes, RuntimeAction};
    use crate::corpus::{desk_cache, ex_a, ex_b, tri};
    use crate::program::enumerate_secrets;
    use crate::smt::SmtProcess;

    fn members_of(p: &Program, nu: &Term) -> Vec<u64> {
        enumerate_secrets(p).unwrap().filter(|a| nu.eval_bool(&a.env(&p.secrets)).unwrap()).map(|a| a.0[0]).collect()
    }

    #[test]
    fn ex_b_classes_and_monitors() {
        let solver = SmtProcess::from_env();
        for model in [AttackModel::Time, AttackModel::Trace] {
            let out = run_monitoring(&ex_b(), &desk_cache(), model, &solver).unwrap();
            assert!(out.is_complete());
            assert_eq!(out.classes.len(), 2, "{}", out.to_text());
            let oracle = oracle_classes(&ex_b(), &desk_cache(), model, None).unwrap();
            for c in &out.classes {
                let want: Vec<u64> = oracle.classes[&c.observation].iter().map(|a| a.0[0]).collect();
                assert_eq!(members_of(&ex_b(), &c.nu()), want);
            }
            let small = out.classes.iter().find(|c| members_of(&ex_b(), &c.nu()) == vec![255]);
            assert!(small.is_some());
        }
    }

    #[test]
    fn ex_b_time_patch_adds_one_miss() {
        let solver = SmtProcess::from_env();
        let out = run_monitoring(&ex_b(), &desk_cache(), AttackModel::Time, &solver).unwrap();
        let deltas: Vec<PatchFix> = out.patches.iter().map(|p| p.fix.clone()).collect();
        assert_eq!(deltas, vec![PatchFix::Delta(0), PatchFix::Delta(1)]);
        assert_eq!(out.reference, Some(Observation::Time(2)));
        let after = oracle_classes(&ex_b(), &desk_cache(), AttackModel::Time, Some(&out.patches)).unwrap();
        assert_eq!(after.class_count(), 1);
    }

    #[test]
    fn ex_b_trace_schedules() {
        let solver = SmtProcess::from_env();
        let out = run_monitoring(&ex_b(), &desk_cache(), AttackModel::Trace, &solver).unwrap();
        assert_eq!(out.reference.as_ref().map(|r| r.to_string()), Some("1100".to_string()));
        let mut fixes: Vec<(Vec<u64>, PatchFix)> =
            out.patches.iter().map(|p| (members_of(&ex_b(), &p.monitor), p.fix.clone())).collect();
        fixes.sort_by_key(|(m, _)| m.len());
        assert_eq!(fixes[0], (vec![255], PatchFix::Actions(vec![RuntimeAction::InjectMiss { at: 0 }])));
        assert_eq!(fixes[1].1, PatchFix::Actions(vec![RuntimeAction::InjectHit { at: 3 }]));
        let after = oracle_classes(&ex_b(), &desk_cache(), AttackModel::Trace, Some(&out.patches)).unwrap();
        assert_eq!(after.class_count(), 1);
    }

    #[test]
    fn ex_a_needs_no_patches() {
        let solver = SmtProcess::from_env();
        let out = run_monitoring(&ex_a(), &desk_cache(), AttackModel::Trace, &solver).unwrap();
        assert_eq!(out.classes.len(), 1);
        assert!(out.patches.is_empty());
        assert!(out.to_text().contains("note verified"));
    }

    #[test]
    fn merge_prefixes_drop_one_class_each() {
        let solver = SmtProcess::from_env();
        for model in [AttackModel::Time, AttackModel::Trace] {
            let out = run_monitoring(&tri(), &desk_cache(), model, &solver).unwrap();
            assert_eq!(out.classes.len(), 3);
            for k in 0..=out.merges() {
                let after = oracle_classes(&tri(), &desk_cache(), model, Some(out.merge_prefix(k))).unwrap();
                assert_eq!(after.class_count(), 3 - k, "{model} k={k}");
            }
        }
    }

    #[test]
    fn timeouts_give_partial_exploration() {
        let solver = SmtProcess::from_env().with_timeout(Duration::ZERO);
        let out = run_monitoring(&ex_b(), &desk_cache(), AttackModel::Time, &solver).unwrap();
        assert!(!out.is_complete());
        assert!(out.to_text().contains("exploration partial"));
    }
}
