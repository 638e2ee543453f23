//! Counterexample-guided abstraction refinement.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde_json::json;

use super::engine::{Abstraction, CexTrace, Engine, Feasibility, VerifyError};
use crate::cache::{bits_to_string, AttackModel, CacheConfig};
use crate::program::{unroll, Program, Secret};
use crate::smt::Backend;
use crate::symbolic::{execute_symbolic, PredId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Every input yields the same observation.
    Verified,
    /// Two feasible traces with different observations.
    Violation {
        first: Box<CexTrace>,
        second: Box<CexTrace>,
    },
    Inconclusive {
        reason: String,
    },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Verified => "verified",
            Verdict::Violation { .. } => "violation",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerificationOutcome {
    pub program: String,
    pub config: CacheConfig,
    pub model: AttackModel,
    pub secrets: Vec<Secret>,
    pub verdict: Verdict,
    pub abstraction: Abstraction,
    pub universe: usize,
    pub accesses: usize,
    pub queries: usize,
    pub elapsed: Duration,
}

impl VerificationOutcome {
    pub fn rounds(&self) -> usize {
        self.abstraction.rounds()
    }

    pub fn tracked(&self) -> usize {
        self.abstraction.tracked.len()
    }

    /// Human-readable report; one `key value` pair per line in fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "program {}", self.program);
        let _ = writeln!(out, "cache {}", self.config);
        let _ = writeln!(out, "model {}", self.model);
        let _ = writeln!(out, "verdict {}", self.verdict.name());
        let _ = writeln!(out, "accesses {}", self.accesses);
        let _ = writeln!(out, "rounds {}", self.rounds());
        let _ = writeln!(out, "tracked {}", self.tracked());
        let _ = writeln!(out, "universe {}", self.universe);
        let _ = writeln!(out, "initial {}", self.abstraction.initial);
        for (k, added) in self.abstraction.history.iter().enumerate() {
            let _ = writeln!(out, "refinement {} {}", k + 1, names(added).join(" "));
        }
        match &self.verdict {
            Verdict::Verified => {}
            Verdict::Violation { first, second } => {
                for (k, t) in [first, second].into_iter().enumerate() {
                    let _ = writeln!(out, "witness{} {}", k + 1, t.witness.describe(&self.secrets));
                    let _ = writeln!(out, "observation{} {}", k + 1, t.observation);
                    let _ = writeln!(out, "misses{} {}", k + 1, bits_to_string(&t.trace.misses));
                    let _ = writeln!(out, "guards{} {}", k + 1, bits_to_string(&t.trace.guards));
                }
            }
            Verdict::Inconclusive { reason } => {
                let _ = writeln!(out, "reason {reason}");
            }
        }
        let _ = writeln!(out, "queries {}", self.queries);
        let _ = writeln!(out, "wall_time {:.3}s", self.elapsed.as_secs_f64());
        out
    }

    /// Machine-readable report. Timing is left out so that equal runs
    /// produce equal documents.
    pub fn to_json(&self) -> serde_json::Value {
        let trace = |t: &CexTrace| {
            json!({
                "witness": t.witness.describe(&self.secrets),
                "observation": t.observation.to_string(),
                "misses": bits_to_string(&t.trace.misses),
                "guards": bits_to_string(&t.trace.guards),
            })
        };
        let mut v = json!({
            "program": self.program,
            "cache": self.config,
            "model": self.model,
            "verdict": self.verdict.name(),
            "accesses": self.accesses,
            "rounds": self.rounds(),
            "tracked": self.tracked(),
            "universe": self.universe,
            "initial": self.abstraction.initial,
            "refinements": self.abstraction.history.iter().map(|r| names(r)).collect::<Vec<_>>(),
            "queries": self.queries,
        });
        match &self.verdict {
            Verdict::Verified => {}
            Verdict::Violation { first, second } => {
                v["witnesses"] = json!([trace(first), trace(second)]);
            }
            Verdict::Inconclusive { reason } => v["reason"] = json!(reason),
        }
        v
    }
}

fn names(ps: &[PredId]) -> Vec<String> {
    ps.iter().map(PredId::var_name).collect()
}

/// One round's result, exposed for inspection of individual rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoundResult {
    Verified,
    Violation(Box<CexTrace>, Box<CexTrace>),
    /// Predicates added from the cores of the spurious traces.
    Refined(Vec<PredId>),
}

/// One refinement round: look for two traces with different observations,
/// check both against the full semantics and refine on the union of the
/// cores of the spurious ones.
///
/// `known` carries a feasible trace between rounds. Refinement only adds
/// true definitions, so it stays a model of the abstract system and can
/// stand in for the first trace of the pair.
pub fn cegar_round(engine: &mut Engine<'_>, known: &mut Option<CexTrace>) -> Result<RoundResult, VerifyError> {
    let first = match known.take() {
        Some(k) => Ok(k),
        None => match engine.abstract_trace(&[], "property-1")? {
            Some(raw) => Err(raw),
            None => return Ok(RoundResult::Verified),
        },
    };
    let first_obs = match &first {
        Ok(k) => k.observation.clone(),
        Err(raw) => raw.observation(engine.model),
    };
    let differ = engine.observation_eq(&first_obs).not();
    let Some(second) = engine.abstract_trace(&[differ], "property-2")? else {
        return Ok(RoundResult::Verified);
    };
    let fa = match first {
        Ok(k) => Feasibility::Feasible(k),
        Err(raw) => engine.feasibility_check(&raw, false)?,
    };
    let fb = engine.feasibility_check(&second, false)?;
    match (fa, fb) {
        (Feasibility::Feasible(x), Feasibility::Feasible(y)) => Ok(RoundResult::Violation(Box::new(x), Box::new(y))),
        (fa, fb) => {
            let mut core = BTreeSet::new();
            for f in [fa, fb] {
                match f {
                    Feasibility::Spurious(c) => core.extend(c),
                    Feasibility::Feasible(k) => *known = Some(k),
                }
            }
            Ok(RoundResult::Refined(engine.refine(&core)?))
        }
    }
}

/// Decides whether all inputs of `p` produce the same observation.
/// Solver timeouts and stuck refinement give an inconclusive verdict;
/// program and solver process failures are errors.
pub fn run_cegar(
    p: &Program,
    cfg: &CacheConfig,
    model: AttackModel,
    backend: &dyn Backend,
) -> Result<VerificationOutcome, VerifyError> {
    let start = Instant::now();
    let trace = unroll(p)?;
    let sys = execute_symbolic(&trace, cfg)?;
    let universe = sys.universe.len();
    let accesses = sys.len();
    let mut engine = Engine::new(sys, model, backend)?;
    let mut known = None;
    let verdict = loop {
        match cegar_round(&mut engine, &mut known) {
            Ok(RoundResult::Verified) => break Verdict::Verified,
            Ok(RoundResult::Violation(first, second)) => break Verdict::Violation { first, second },
            Ok(RoundResult::Refined(_)) => continue,
            Err(e) if e.is_inconclusive() => break Verdict::Inconclusive { reason: e.to_string() },
            Err(e) => return Err(e),
        }
    };
    Ok(VerificationOutcome {
        program: p.name.clone(),
        config: *cfg,
        model,
        secrets: p.secrets.clone(),
        verdict,
        abstraction: engine.abstraction.clone(),
        universe,
        accesses,
        queries: engine.queries(),
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{observe, run_program};
    use crate::corpus::{desk_cache, ex_a, ex_b, tri};
    use crate::smt::SmtProcess;

    fn check_witness(p: &Program, cfg: &CacheConfig, model: AttackModel, t: &CexTrace) {
        let misses: Vec<bool> = run_program(p, cfg, &t.witness).iter().map(|r| r.miss).collect();
        assert_eq!(observe(model, &misses), t.observation);
    }

    #[test]
    fn ex_a_first_round_refines_on_the_last_access() {
        let solver = SmtProcess::from_env();
        let sys = execute_symbolic(&unroll(&ex_a()).unwrap(), &desk_cache()).unwrap();
        let mut engine = Engine::new(sys, AttackModel::Time, &solver).unwrap();
        let added = match cegar_round(&mut engine, &mut None).unwrap() {
            RoundResult::Refined(added) => added,
            other => panic!("expected a refinement, got {other:?}"),
        };
        assert_eq!(added, vec![PredId::set(3, 4), PredId::tag(3, 4)]);
    }

    #[test]
    fn ex_a_verifies_with_a_partial_abstraction() {
        let solver = SmtProcess::from_env();
        for model in [AttackModel::Time, AttackModel::Trace] {
            let out = run_cegar(&ex_a(), &desk_cache(), model, &solver).unwrap();
            assert_eq!(out.verdict, Verdict::Verified, "{}", out.to_text());
            assert!(out.tracked() < out.universe);
            assert!(out.rounds() >= 1);
        }
    }

    #[test]
    fn ex_b_violates_with_concrete_witnesses() {
        let solver = SmtProcess::from_env();
        for model in [AttackModel::Time, AttackModel::Trace] {
            let out = run_cegar(&ex_b(), &desk_cache(), model, &solver).unwrap();
            let Verdict::Violation { first, second } = &out.verdict else {
                panic!("expected a violation: {}", out.to_text());
            };
            assert_ne!(first.observation, second.observation);
            check_witness(&ex_b(), &desk_cache(), model, first);
            check_witness(&ex_b(), &desk_cache(), model, second);
            let keys = [first.witness.0[0], second.witness.0[0]];
            assert!(keys.contains(&255), "{keys:?}");
        }
    }

    #[test]
    fn reports_are_stable() {
        let solver = SmtProcess::from_env();
        let out = run_cegar(&tri(), &desk_cache(), AttackModel::Time, &solver).unwrap();
        let text = out.to_text();
        assert!(text.starts_with(
            "program tri\ncache sets=32 line_size=32 assoc=1 policy=direct\nmodel time\nverdict violation\n"
        ));
        let json = out.to_json();
        assert_eq!(json["verdict"], "violation");
        assert_eq!(json["witnesses"].as_array().unwrap().len(), 2);
        assert!(json.get("wall_time").is_none());
    }

    #[test]
    fn solver_timeouts_are_inconclusive() {
        let solver = SmtProcess::from_env().with_timeout(Duration::ZERO);
        let out = run_cegar(&ex_a(), &desk_cache(), AttackModel::Time, &solver).unwrap();
        assert!(matches!(out.verdict, Verdict::Inconclusive { .. }));
    }
}
