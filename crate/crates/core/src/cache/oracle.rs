//! Exhaustive ground truth: run every secret assignment through the
//! concrete interpreter and the simulator, optionally patch, and group
//! assignments by observation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::json;

use super::config::{CacheConfig, Mapped};
use super::observe::{apply_actions, bits_to_string, observe, ActionError, AttackModel, Observation};
use super::sim::CacheState;
use crate::patch::{Patch, PatchFix};
use crate::program::{enumerate_secrets, run_concrete, Assignment, Program, ProgramError, Secret};
use crate::smt::EvalError;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("patch for input {input}: {source}")]
    Action { input: String, source: ActionError },
    #[error("a {patch} patch cannot be applied under the {model} model")]
    ModelMismatch { patch: AttackModel, model: AttackModel },
    #[error("cannot evaluate patch monitor: {0}")]
    Monitor(#[from] EvalError),
}

/// One executed access of a concrete run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunAccess {
    pub site: usize,
    pub address: u32,
    pub mapped: Mapped,
    pub miss: bool,
}

/// Concrete execution plus simulation for one assignment.
pub fn run_program(p: &Program, cfg: &CacheConfig, secrets: &Assignment) -> Vec<RunAccess> {
    let mut cache = CacheState::new(*cfg);
    run_concrete(p, secrets)
        .into_iter()
        .map(|e| {
            let mapped = cfg.map_address(e.address as u64);
            RunAccess { site: e.site, address: e.address, mapped, miss: cache.access(mapped.block) }
        })
        .collect()
}

/// Observation of one run after the first matching patch, if any.
pub fn patched_observation(
    secrets: &[Secret],
    input: &Assignment,
    run: &[RunAccess],
    model: AttackModel,
    patches: &[Patch],
) -> Result<Observation, OracleError> {
    let misses: Vec<bool> = run.iter().map(|a| a.miss).collect();
    let env = input.env(secrets);
    for patch in patches {
        if !patch.monitor.eval_bool(&env)? {
            continue;
        }
        if patch.model != model {
            return Err(OracleError::ModelMismatch { patch: patch.model, model });
        }
        return match &patch.fix {
            PatchFix::Delta(d) => Ok(Observation::Time(observe(model, &misses).as_time().unwrap_or(0) + d)),
            PatchFix::Actions(actions) => {
                let seq: Vec<(u64, bool)> = run.iter().map(|a| (a.mapped.block, a.miss)).collect();
                apply_actions(&seq, actions)
                    .map(Observation::Trace)
                    .map_err(|source| OracleError::Action { input: input.describe(secrets), source })
            }
        };
    }
    Ok(observe(model, &misses))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputRecord {
    pub input: Assignment,
    /// Unpatched miss vector of the executed accesses.
    pub misses: Vec<bool>,
    pub observation: Observation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub program: String,
    pub config: CacheConfig,
    pub model: AttackModel,
    pub patched: bool,
    pub secrets: Vec<Secret>,
    /// Observation to members, members in enumeration order.
    pub classes: BTreeMap<Observation, Vec<Assignment>>,
    pub inputs: Vec<InputRecord>,
}

pub fn oracle_classes(
    p: &Program,
    cfg: &CacheConfig,
    model: AttackModel,
    patches: Option<&[Patch]>,
) -> Result<OracleReport, OracleError> {
    let domain = enumerate_secrets(p)?;
    let mut classes: BTreeMap<Observation, Vec<Assignment>> = BTreeMap::new();
    let mut inputs = Vec::with_capacity(domain.size() as usize);
    for input in domain {
        let run = run_program(p, cfg, &input);
        let observation = patched_observation(&p.secrets, &input, &run, model, patches.unwrap_or(&[]))?;
        classes.entry(observation.clone()).or_default().push(input.clone());
        inputs.push(InputRecord { input, misses: run.iter().map(|a| a.miss).collect(), observation });
    }
    Ok(OracleReport {
        program: p.name.clone(),
        config: *cfg,
        model,
        patched: patches.is_some(),
        secrets: p.secrets.clone(),
        classes,
        inputs,
    })
}

impl OracleReport {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Class sizes in key order.
    pub fn class_sizes(&self) -> Vec<u64> {
        self.classes.values().map(|m| m.len() as u64).collect()
    }

    pub fn class_of(&self, input: &Assignment) -> Option<&Observation> {
        self.classes.iter().find(|(_, m)| m.contains(input)).map(|(o, _)| o)
    }

    /// Members as runs of consecutive assignments, `a..b` for runs.
    pub fn describe_members(&self, members: &[Assignment]) -> String {
        let index = |a: &Assignment| self.secrets.iter().zip(&a.0).fold(0u64, |acc, (s, v)| (acc << s.width) | v);
        let mut parts = Vec::new();
        let mut k = 0;
        while k < members.len() {
            let mut j = k;
            while j + 1 < members.len() && index(&members[j + 1]) == index(&members[j]) + 1 {
                j += 1;
            }
            let first = members[k].describe(&self.secrets);
            if j == k {
                parts.push(first);
            } else {
                parts.push(format!("{first}..{}", members[j].describe(&self.secrets)));
            }
            k = j + 1;
        }
        parts.join(" ")
    }

    /// Line-oriented report with sorted class keys.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "program {}", self.program);
        let _ = writeln!(out, "cache {}", self.config);
        let _ = writeln!(out, "model {}", self.model);
        let _ = writeln!(out, "patched {}", self.patched);
        let _ = writeln!(out, "inputs {}", self.inputs.len());
        let _ = writeln!(out, "classes {}", self.classes.len());
        for (obs, members) in &self.classes {
            let _ = writeln!(out, "class {obs} size={} members={}", members.len(), self.describe_members(members));
        }
        for r in &self.inputs {
            let _ = writeln!(
                out,
                "input {} misses={} observation={}",
                r.input.describe(&self.secrets),
                if r.misses.is_empty() { "-".to_string() } else { bits_to_string(&r.misses) },
                r.observation
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "program": self.program,
            "cache": self.config,
            "model": self.model,
            "patched": self.patched,
            "classes": self.classes.iter().map(|(o, m)| json!({
                "observation": o.to_string(),
                "size": m.len(),
                "members": self.describe_members(m),
            })).collect::<Vec<_>>(),
            "inputs": self.inputs.iter().map(|r| json!({
                "input": r.input.describe(&self.secrets),
                "misses": bits_to_string(&r.misses),
                "observation": r.observation.to_string(),
            })).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;

    #[test]
    fn classes_partition_the_domain() {
        let p = parse_program(
            "secret k:u3; array A[8]:16 @0x0;
             load A[0] load A[k] load A[0]",
        )
        .unwrap();
        let cfg = CacheConfig::direct(4, 16);
        let r = oracle_classes(&p, &cfg, AttackModel::Trace, None).unwrap();
        assert_eq!(r.class_sizes().iter().sum::<u64>(), 8);
        // k=0 hits, k in {1,2,3,5,6,7} misses without conflict, k=4 evicts A[0]
        let keys: Vec<String> = r.classes.keys().map(|o| o.to_string()).collect();
        assert_eq!(keys, vec!["100", "110", "111"]);
        assert_eq!(r.classes[&Observation::Trace(vec![true, true, true])], vec![Assignment(vec![4])]);
        assert!(r.to_text().contains("class 110 size=6 members=k=1..k=3 k=5..k=7"));
    }
}
