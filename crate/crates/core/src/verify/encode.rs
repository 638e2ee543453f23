//! Observation constraints over the miss and guard variables.

use crate::cache::{AttackModel, Observation};
use crate::smt::{Model, Term};
use crate::symbolic::{guard_var, miss_var};

/// `observation = o` for an `n`-access system.
///
/// Time: `SUM ite(miss_i, 1, 0) = o`; unexecuted accesses never miss.
/// Trace: running counts `c_i = c_{i-1} + ite(guard_i, 1, 0)` place each
/// executed access at its position in `o`, with `c_n = |o|`.
pub fn observation_eq(o: &Observation, n: usize) -> Term {
    match o {
        Observation::Time(k) => {
            let total = Term::int_add((1..=n).map(|i| miss_var(i).indicator()));
            total.eq_to(&Term::int(*k as i64))
        }
        Observation::Trace(bits) => {
            let mut parts = Vec::new();
            let mut count = Term::int(0);
            for i in 1..=n {
                let g = guard_var(i);
                let m = miss_var(i);
                for (p, &b) in bits.iter().enumerate() {
                    let here = g.and2(&count.eq_to(&Term::int(p as i64)));
                    let bit = if b { m.clone() } else { m.not() };
                    parts.push(here.implies(&bit));
                }
                // an executed access past the end of `o` is excluded by the length check
                count = Term::int_add([count, g.indicator()]);
            }
            parts.push(count.eq_to(&Term::int(bits.len() as i64)));
            Term::and(parts)
        }
    }
}

/// Per-access miss and guard values of a model.
pub fn read_vectors(m: &Model, n: usize) -> Option<(Vec<bool>, Vec<bool>)> {
    let misses = (1..=n).map(|i| m.bool(&format!("miss.{i}"))).collect::<Option<Vec<_>>>()?;
    let guards = (1..=n).map(|i| m.bool(&format!("guard.{i}"))).collect::<Option<Vec<_>>>()?;
    Some((misses, guards))
}

/// Observation of per-access vectors: only executed accesses are seen.
pub fn observation_of(model: AttackModel, misses: &[bool], guards: &[bool]) -> Observation {
    let executed: Vec<bool> = misses.iter().zip(guards).filter(|(_, &g)| g).map(|(&m, _)| m).collect();
    crate::cache::observe(model, &executed)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::smt::Value;

    fn env(misses: &[bool], guards: &[bool]) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        for (k, (&x, &g)) in misses.iter().zip(guards).enumerate() {
            m.insert(format!("miss.{}", k + 1), Value::Bool(x && g));
            m.insert(format!("guard.{}", k + 1), Value::Bool(g));
        }
        m
    }

    fn bits(v: u32, n: usize) -> Vec<bool> {
        (0..n).map(|k| v >> k & 1 == 1).collect()
    }

    /// Equality holds exactly when the observed value matches, checked by
    /// enumerating every vector pair and every candidate observation.
    #[test]
    fn equality_encoding_is_exact() {
        for n in 0..=4usize {
            let mut candidates = vec![];
            for len in 0..=n + 1 {
                for v in 0..1u32 << len {
                    candidates.push(Observation::Trace(bits(v, len)));
                }
            }
            candidates.extend((0..=n as u64 + 1).map(Observation::Time));
            for mv in 0..1u32 << n {
                for gv in 0..1u32 << n {
                    let (ms, gs) = (bits(mv, n), bits(gv, n));
                    let e = env(&ms, &gs);
                    let lookup = |name: &str| e.get(name).copied();
                    let misses: Vec<bool> = ms.iter().zip(&gs).map(|(&m, &g)| m && g).collect();
                    for o in &candidates {
                        let want = observation_of(o.model(), &misses, &gs) == *o;
                        let got = observation_eq(o, n).eval_bool(&lookup).unwrap();
                        assert_eq!(got, want, "n={n} misses={ms:?} guards={gs:?} o={o}");
                    }
                }
            }
        }
    }

    #[test]
    fn unexecuted_accesses_are_not_observed() {
        let o = observation_of(AttackModel::Trace, &[true, false, true], &[true, false, true]);
        assert_eq!(o, Observation::Trace(vec![true, true]));
        let o = observation_of(AttackModel::Time, &[true, false, true], &[true, true, true]);
        assert_eq!(o, Observation::Time(2));
    }
}
