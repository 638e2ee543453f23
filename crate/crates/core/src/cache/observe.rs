//! Attacker observations and runtime actions on observed traces.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackModel {
    /// Total number of misses.
    Time,
    /// Hit/miss sequence of the executed accesses.
    Trace,
}

impl fmt::Display for AttackModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackModel::Time => "time",
            AttackModel::Trace => "trace",
        })
    }
}

impl FromStr for AttackModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "time" => Ok(AttackModel::Time),
            "trace" => Ok(AttackModel::Trace),
            _ => Err(format!("unknown attack model `{s}` (expected `time` or `trace`)")),
        }
    }
}

/// What the attacker sees. Trace bits are `true` for a miss.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Observation {
    Time(u64),
    Trace(Vec<bool>),
}

impl Observation {
    pub fn model(&self) -> AttackModel {
        match self {
            Observation::Time(_) => AttackModel::Time,
            Observation::Trace(_) => AttackModel::Trace,
        }
    }

    pub fn as_time(&self) -> Option<u64> {
        match self {
            Observation::Time(n) => Some(*n),
            Observation::Trace(_) => None,
        }
    }

    pub fn as_trace(&self) -> Option<&[bool]> {
        match self {
            Observation::Trace(t) => Some(t),
            Observation::Time(_) => None,
        }
    }

    /// Parses the [`fmt::Display`] form for the given model.
    pub fn parse(model: AttackModel, s: &str) -> Result<Observation, String> {
        match model {
            AttackModel::Time => s.parse().map(Observation::Time).map_err(|_| format!("bad miss count `{s}`")),
            AttackModel::Trace if s == "-" => Ok(Observation::Trace(Vec::new())),
            AttackModel::Trace => s
                .chars()
                .map(|c| match c {
                    '1' => Ok(true),
                    '0' => Ok(false),
                    _ => Err(format!("bad trace `{s}`")),
                })
                .collect::<Result<_, _>>()
                .map(Observation::Trace),
        }
    }
}

/// Miss count, or the trace as `0`/`1` digits (`-` when empty).
impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Time(n) => write!(f, "{n}"),
            Observation::Trace(t) if t.is_empty() => f.write_str("-"),
            Observation::Trace(t) => f.write_str(&bits_to_string(t)),
        }
    }
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&m| if m { '1' } else { '0' }).collect()
}

/// Observation of an executed miss vector.
pub fn observe(model: AttackModel, misses: &[bool]) -> Observation {
    match model {
        AttackModel::Time => Observation::Time(misses.iter().filter(|&&m| m).count() as u64),
        AttackModel::Trace => Observation::Trace(misses.to_vec()),
    }
}

/// Action performed after `at` executed accesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "ActionRecord", try_from = "ActionRecord")]
pub enum RuntimeAction {
    /// Access a fresh block: one extra observed miss.
    InjectMiss { at: usize },
    /// Re-access an already cached block: one extra observed hit.
    InjectHit { at: usize },
    /// Evict a block so that its next access misses. Without an explicit
    /// block, the block of the next executed access is meant.
    Invalidate { at: usize, block: Option<u64> },
}

impl RuntimeAction {
    pub fn at(&self) -> usize {
        match *self {
            RuntimeAction::InjectMiss { at }
            | RuntimeAction::InjectHit { at }
            | RuntimeAction::Invalidate { at, .. } => at,
        }
    }
}

impl fmt::Display for RuntimeAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeAction::InjectMiss { at } => write!(f, "({at}, miss)"),
            RuntimeAction::InjectHit { at } => write!(f, "({at}, hit)"),
            RuntimeAction::Invalidate { at, block: None } => write!(f, "({at}, invalidate)"),
            RuntimeAction::Invalidate { at, block: Some(b) } => write!(f, "({at}, invalidate {b})"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ActionRecord {
    at: usize,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    block: Option<u64>,
}

impl From<RuntimeAction> for ActionRecord {
    fn from(a: RuntimeAction) -> ActionRecord {
        let (kind, block) = match a {
            RuntimeAction::InjectMiss { .. } => ("miss", None),
            RuntimeAction::InjectHit { .. } => ("hit", None),
            RuntimeAction::Invalidate { block, .. } => ("invalidate", block),
        };
        ActionRecord { at: a.at(), kind: kind.to_string(), block }
    }
}

impl TryFrom<ActionRecord> for RuntimeAction {
    type Error = String;

    fn try_from(r: ActionRecord) -> Result<RuntimeAction, String> {
        match (r.kind.as_str(), r.block) {
            ("miss", None) => Ok(RuntimeAction::InjectMiss { at: r.at }),
            ("hit", None) => Ok(RuntimeAction::InjectHit { at: r.at }),
            ("invalidate", block) => Ok(RuntimeAction::Invalidate { at: r.at, block }),
            (k, Some(_)) if k == "miss" || k == "hit" => Err(format!("`{k}` actions take no block")),
            (k, _) => Err(format!("unknown action kind `{k}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ActionError {
    #[error("injecting a hit before any access is impossible")]
    HitAtStart,
    #[error("action {0} lies beyond the {1} executed accesses")]
    OutOfRange(RuntimeAction, usize),
    #[error("actions are not sorted by position")]
    Unsorted,
    #[error("action {0} invalidates a block that was never accessed before it")]
    UnknownBlock(RuntimeAction),
}

/// Applies `actions` to an executed access sequence of `(block, miss)` pairs
/// and returns the attacker-visible hit/miss sequence. Injected accesses do
/// not disturb the cache state; an invalidation turns the next access to its
/// block into a miss.
pub fn apply_actions(accesses: &[(u64, bool)], actions: &[RuntimeAction]) -> Result<Vec<bool>, ActionError> {
    let n = accesses.len();
    if actions.windows(2).any(|w| w[0].at() > w[1].at()) {
        return Err(ActionError::Unsorted);
    }
    let mut out = Vec::with_capacity(n + actions.len());
    let mut pending: HashSet<u64> = HashSet::new();
    let mut next = actions.iter().peekable();
    for pos in 0..=n {
        while let Some(a) = next.next_if(|a| a.at() == pos) {
            match *a {
                RuntimeAction::InjectMiss { .. } => out.push(true),
                RuntimeAction::InjectHit { at } => {
                    if at == 0 {
                        return Err(ActionError::HitAtStart);
                    }
                    out.push(false);
                }
                RuntimeAction::Invalidate { at, block } => {
                    let block = match block {
                        Some(b) => b,
                        None => accesses.get(at).ok_or(ActionError::OutOfRange(*a, n))?.0,
                    };
                    if !accesses[..at].iter().any(|&(b, _)| b == block) {
                        return Err(ActionError::UnknownBlock(*a));
                    }
                    pending.insert(block);
                }
            }
        }
        if let Some(&(block, miss)) = accesses.get(pos) {
            out.push(miss || pending.remove(&block));
        }
    }
    if let Some(a) = next.next() {
        return Err(ActionError::OutOfRange(*a, n));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc(bits: &str) -> Vec<(u64, bool)> {
        // distinct blocks per hit/miss pattern are irrelevant except for invalidation
        bits.chars().enumerate().map(|(i, c)| (i as u64 % 2, c == '1')).collect()
    }

    fn s(v: &[bool]) -> String {
        bits_to_string(v)
    }

    #[test]
    fn observations() {
        let t = [true, true, false, false];
        assert_eq!(observe(AttackModel::Time, &t), Observation::Time(2));
        assert_eq!(observe(AttackModel::Trace, &t).to_string(), "1100");
        assert_eq!(observe(AttackModel::Time, &[]), Observation::Time(0));
        assert_eq!(Observation::parse(AttackModel::Trace, "1100").unwrap(), observe(AttackModel::Trace, &t));
        assert_eq!(Observation::parse(AttackModel::Trace, "-").unwrap(), Observation::Trace(vec![]));
    }

    #[test]
    fn insertions() {
        assert_eq!(s(&apply_actions(&acc("110"), &[RuntimeAction::InjectMiss { at: 0 }]).unwrap()), "1110");
        assert_eq!(s(&apply_actions(&acc("110"), &[RuntimeAction::InjectHit { at: 3 }]).unwrap()), "1100");
        assert_eq!(s(&apply_actions(&acc("101"), &[]).unwrap()), "101");
        assert_eq!(apply_actions(&acc("1"), &[RuntimeAction::InjectHit { at: 0 }]), Err(ActionError::HitAtStart));
        assert!(matches!(
            apply_actions(&acc("1"), &[RuntimeAction::InjectMiss { at: 2 }]),
            Err(ActionError::OutOfRange(..))
        ));
    }

    #[test]
    fn invalidation_turns_next_hit_into_miss() {
        let seq = [(7, true), (8, true), (7, false), (7, false)];
        let a = [RuntimeAction::Invalidate { at: 2, block: Some(7) }];
        assert_eq!(s(&apply_actions(&seq, &a).unwrap()), "1110");
        let a = [RuntimeAction::Invalidate { at: 3, block: None }];
        assert_eq!(s(&apply_actions(&seq, &a).unwrap()), "1101");
        let a = [RuntimeAction::Invalidate { at: 1, block: Some(9) }];
        assert!(matches!(apply_actions(&seq, &a), Err(ActionError::UnknownBlock(_))));
        let a = [RuntimeAction::Invalidate { at: 0, block: None }];
        assert!(matches!(apply_actions(&seq, &a), Err(ActionError::UnknownBlock(_))));
    }

    #[test]
    fn action_serialization() {
        let acts = vec![
            RuntimeAction::InjectMiss { at: 0 },
            RuntimeAction::InjectHit { at: 3 },
            RuntimeAction::Invalidate { at: 2, block: None },
            RuntimeAction::Invalidate { at: 2, block: Some(5) },
        ];
        let text = serde_json::to_string(&acts).unwrap();
        assert_eq!(
            text,
            r#"[{"at":0,"kind":"miss"},{"at":3,"kind":"hit"},{"at":2,"kind":"invalidate"},{"at":2,"kind":"invalidate","block":5}]"#
        );
        assert_eq!(serde_json::from_str::<Vec<RuntimeAction>>(&text).unwrap(), acts);
        assert!(serde_json::from_str::<RuntimeAction>(r#"{"at":1,"kind":"flush"}"#).is_err());
    }
}
