//! Patches that send every observation class to one reference observation.

use super::align::{align_traces, reference_trace};
use super::model::{Patch, PatchFix};
use crate::cache::{AttackModel, Observation};
use crate::smt::Term;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("class observations mix attack models")]
    MixedModels,
    #[error("class {0} cannot be edited into the reference {1}")]
    Unreachable(Observation, Observation),
}

/// Patches for `classes` (class monitor, observation), in input order, and
/// the reference observation they all lead to.
///
/// Time: each class gets the misses it lacks to reach the largest count.
/// Trace: the reference is a common supersequence of the class traces and
/// each class gets an action schedule aligned to it.
pub fn synthesize(classes: &[(Term, Observation)]) -> Result<(Vec<Patch>, Option<Observation>), SynthError> {
    let Some((_, first)) = classes.first() else {
        return Ok((Vec::new(), None));
    };
    let model = first.model();
    if classes.iter().any(|(_, o)| o.model() != model) {
        return Err(SynthError::MixedModels);
    }
    match model {
        AttackModel::Time => synth_time_patches(classes),
        AttackModel::Trace => synth_trace_patches(classes),
    }
}

pub fn synth_time_patches(classes: &[(Term, Observation)]) -> Result<(Vec<Patch>, Option<Observation>), SynthError> {
    let counts =
        classes.iter().map(|(_, o)| o.as_time().ok_or(SynthError::MixedModels)).collect::<Result<Vec<_>, _>>()?;
    let Some(&max) = counts.iter().max() else {
        return Ok((Vec::new(), None));
    };
    let patches = classes
        .iter()
        .zip(&counts)
        .map(|((nu, o), &k)| Patch {
            monitor: nu.clone(),
            model: AttackModel::Time,
            fix: PatchFix::Delta(max - k),
            observation: Some(o.clone()),
        })
        .collect();
    Ok((patches, Some(Observation::Time(max))))
}

pub fn synth_trace_patches(classes: &[(Term, Observation)]) -> Result<(Vec<Patch>, Option<Observation>), SynthError> {
    let mut traces =
        classes.iter().map(|(_, o)| o.as_trace().ok_or(SynthError::MixedModels)).collect::<Result<Vec<_>, _>>()?;
    // fold in a fixed order so that the reference does not depend on exploration order
    traces.sort();
    let Some(reference) = reference_trace(traces.iter().copied()) else {
        return Ok((Vec::new(), None));
    };
    let target = Observation::Trace(reference.clone());
    let patches = classes
        .iter()
        .map(|(nu, o)| {
            let bits = o.as_trace().expect("checked above");
            let actions =
                align_traces(bits, &reference).ok_or_else(|| SynthError::Unreachable(o.clone(), target.clone()))?;
            Ok(Patch {
                monitor: nu.clone(),
                model: AttackModel::Trace,
                fix: PatchFix::Actions(actions),
                observation: Some(o.clone()),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((patches, Some(target)))
}
