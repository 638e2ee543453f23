//! Patch representation and the patch file format.
//!
//! A patch file is a JSON array of objects
//! `{"monitor": <term>, "model": "time"|"trace", "delta": n}` or
//! `{..., "actions": [{"at": n, "kind": "miss"|"hit"|"invalidate", "block": b?}]}`.
//! Monitors are stored as [`SharedForm`]s: SMT-LIB terms over `sec.<name>`.

use serde::{Deserialize, Serialize};

use crate::cache::{AttackModel, Observation, RuntimeAction};
use crate::smt::{SharedForm, Sort, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatchFix {
    /// Extra misses injected at the end of the run.
    Delta(u64),
    /// Action schedule applied to the executed trace.
    Actions(Vec<RuntimeAction>),
}

/// Runtime patch for the inputs satisfying `monitor`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub monitor: Term,
    pub model: AttackModel,
    pub fix: PatchFix,
    /// Observation of the class before patching.
    pub observation: Option<Observation>,
}

impl Patch {
    pub fn is_identity(&self) -> bool {
        match &self.fix {
            PatchFix::Delta(d) => *d == 0,
            PatchFix::Actions(a) => a.is_empty(),
        }
    }

    pub fn describe_fix(&self) -> String {
        match &self.fix {
            PatchFix::Delta(d) => format!("delta {d}"),
            PatchFix::Actions(a) if a.is_empty() => "actions []".to_string(),
            PatchFix::Actions(a) => {
                format!("actions [{}]", a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "))
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchRecord {
    monitor: SharedForm,
    model: AttackModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    actions: Option<Vec<RuntimeAction>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observation: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum PatchFileError {
    #[error("malformed patch file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("patch {index}: {msg}")]
    Invalid { index: usize, msg: String },
}

pub fn write_patch_file(patches: &[Patch]) -> String {
    let records: Vec<PatchRecord> = patches
        .iter()
        .map(|p| {
            let (delta, actions) = match &p.fix {
                PatchFix::Delta(d) => (Some(*d), None),
                PatchFix::Actions(a) => (None, Some(a.clone())),
            };
            PatchRecord {
                monitor: SharedForm::from_term(&p.monitor),
                model: p.model,
                delta,
                actions,
                observation: p.observation.as_ref().map(|o| o.to_string()),
            }
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&records).expect("patch records serialize");
    text.push('\n');
    text
}

pub fn read_patch_file(text: &str) -> Result<Vec<Patch>, PatchFileError> {
    let records: Vec<PatchRecord> = serde_json::from_str(text)?;
    records
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            let invalid = |msg: String| PatchFileError::Invalid { index, msg };
            let monitor = r.monitor.to_term().map_err(|e| invalid(e.to_string()))?;
            if monitor.sort() != Sort::Bool {
                return Err(invalid("monitor is not a formula".into()));
            }
            if let Some((v, _)) = monitor.free_vars().iter().find(|(v, _)| !v.starts_with("sec.")) {
                return Err(invalid(format!("monitor mentions non-secret variable `{v}`")));
            }
            let fix = match (r.model, r.delta, r.actions) {
                (AttackModel::Time, Some(d), None) => PatchFix::Delta(d),
                (AttackModel::Trace, None, Some(a)) => PatchFix::Actions(a),
                (AttackModel::Time, ..) => return Err(invalid("time patches carry exactly a `delta`".into())),
                (AttackModel::Trace, ..) => return Err(invalid("trace patches carry exactly `actions`".into())),
            };
            let observation = r.observation.map(|o| Observation::parse(r.model, &o)).transpose().map_err(invalid)?;
            Ok(Patch { monitor, model: r.model, fix, observation })
        })
        .collect()
}
