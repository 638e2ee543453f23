//! Edit schedules between hit/miss sequences and the common reference
//! sequence that every class is edited into.
//!
//! Allowed edits turn `a` into `b`: insert a hit, insert a miss, or turn a
//! hit into a miss. No runtime action can turn a miss into a hit, and a hit
//! cannot be injected before the first access.

use crate::cache::RuntimeAction;

/// Lexicographic edit cost: fewest edits, then fewest insertions strictly
/// inside the run. Every schedule inserts exactly `|b| - |a|` accesses, so
/// fewest edits also means fewest substitutions.
type Cost = (usize, usize);

fn add(a: Cost, b: Cost) -> Cost {
    (a.0 + b.0, a.1 + b.1)
}

#[derive(Clone, Copy)]
enum Step {
    Insert(bool),
    Substitute,
    Match,
}

/// Cheapest action schedule turning `a` into `b`, or `None` when `b` is
/// unreachable. Insertions at the start or end of the run are preferred over
/// insertions inside it; remaining ties go to the earliest position. Actions
/// are positioned by the number of executed accesses before them.
pub fn align_traces(a: &[bool], b: &[bool]) -> Option<Vec<RuntimeAction>> {
    let (n, m) = (a.len(), b.len());
    // best[i][j]: cost of producing b[j..] from a[i..]
    let mut best: Vec<Vec<Option<Cost>>> = vec![vec![None; m + 1]; n + 1];
    best[n][m] = Some((0, 0));
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            if i == n && j == m {
                continue;
            }
            best[i][j] = steps(a, b, i, j).into_iter().filter_map(|(_, c, (i2, j2))| Some(add(c, best[i2][j2]?))).min();
        }
    }
    best[0][0]?;
    let mut actions = Vec::new();
    let (mut i, mut j) = (0, 0);
    while (i, j) != (n, m) {
        let target = best[i][j]?;
        let (step, _, next) = steps(a, b, i, j)
            .into_iter()
            .find(|(_, c, (i2, j2))| best[*i2][*j2].map(|r| add(*c, r)) == Some(target))?;
        match step {
            Step::Insert(true) => actions.push(RuntimeAction::InjectMiss { at: i }),
            Step::Insert(false) => actions.push(RuntimeAction::InjectHit { at: i }),
            Step::Substitute => actions.push(RuntimeAction::Invalidate { at: i, block: None }),
            Step::Match => {}
        }
        (i, j) = next;
    }
    Some(actions)
}

/// Moves out of state `(i, j)` in preference order: acting now comes before
/// consuming an access, which keeps ties at the earliest position.
fn steps(a: &[bool], b: &[bool], i: usize, j: usize) -> Vec<(Step, Cost, (usize, usize))> {
    let mut out = Vec::with_capacity(3);
    if let Some(&want) = b.get(j) {
        if want || i > 0 {
            let interior = usize::from(i > 0 && i < a.len());
            out.push((Step::Insert(want), (1, interior), (i, j + 1)));
        }
        if let Some(&have) = a.get(i) {
            if !have && want {
                out.push((Step::Substitute, (1, 0), (i + 1, j + 1)));
            }
            if have == want {
                out.push((Step::Match, (0, 0), (i + 1, j + 1)));
            }
        }
    }
    out
}

/// Shortest common supersequence of `a` and `b`; among the shortest, the
/// lexicographically greatest with misses ordered before hits.
pub fn shortest_supersequence(a: &[bool], b: &[bool]) -> Vec<bool> {
    let (n, m) = (a.len(), b.len());
    // len[i][j]: length of the shortest supersequence of a[i..] and b[j..]
    let mut len = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            len[i][j] = match (a.get(i), b.get(j)) {
                (None, _) => m - j,
                (_, None) => n - i,
                (Some(x), Some(y)) if x == y => 1 + len[i + 1][j + 1],
                _ => 1 + len[i + 1][j].min(len[i][j + 1]),
            };
        }
    }
    let mut out = Vec::with_capacity(len[0][0]);
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        // emitting symbol c from (i, j) advances every side whose head is c
        let after = |c: bool| {
            let i2 = if a.get(i) == Some(&c) { i + 1 } else { i };
            let j2 = if b.get(j) == Some(&c) { j + 1 } else { j };
            ((i2, j2) != (i, j)).then_some((i2, j2))
        };
        let c = [true, false]
            .into_iter()
            .find(|&c| after(c).is_some_and(|(i2, j2)| len[i2][j2] + 1 == len[i][j]))
            .expect("some head symbol lies on a shortest supersequence");
        out.push(c);
        (i, j) = after(c).expect("checked above");
    }
    out
}

/// Reference sequence for a set of class observations: the pairwise
/// supersequence folded over `traces` in order. Every input is a
/// subsequence of the result, so every class reaches it by insertions.
pub fn reference_trace<'a>(traces: impl IntoIterator<Item = &'a [bool]>) -> Option<Vec<bool>> {
    traces.into_iter().fold(None, |acc: Option<Vec<bool>>, t| match acc {
        None => Some(t.to_vec()),
        Some(r) => Some(shortest_supersequence(&r, t)),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::cache::{apply_actions, bits_to_string};

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == 'm').collect()
    }

    /// Access sequence where every hit re-touches the previous block, so
    /// that invalidation has a block to act on.
    fn run(a: &[bool]) -> Vec<(u64, bool)> {
        let mut block = 0;
        a.iter()
            .map(|&miss| {
                if miss {
                    block += 1;
                }
                (block, miss)
            })
            .collect()
    }

    fn is_subsequence(a: &[bool], b: &[bool]) -> bool {
        let mut it = b.iter();
        a.iter().all(|x| it.any(|y| y == x))
    }

    /// Brute force over edit sequences: match or substitute the head of
    /// `a`, or insert the head of `b`.
    fn reachable(a: &[bool], b: &[bool], started: bool) -> bool {
        let Some((&y, rb)) = b.split_first() else {
            return a.is_empty();
        };
        let consume = a.split_first().is_some_and(|(&x, ra)| !(x && !y) && reachable(ra, rb, true));
        consume || (y || started) && reachable(a, rb, started)
    }

    #[test]
    fn two_class_example() {
        let target = bits("mmhh");
        assert_eq!(reference_trace([bits("mhh").as_slice(), bits("mmh").as_slice()]), Some(target.clone()));
        assert_eq!(align_traces(&bits("mhh"), &target), Some(vec![RuntimeAction::InjectMiss { at: 0 }]));
        assert_eq!(align_traces(&bits("mmh"), &target), Some(vec![RuntimeAction::InjectHit { at: 3 }]));
        assert_eq!(align_traces(&target, &target), Some(vec![]));
    }

    #[test]
    fn forbidden_edits() {
        assert_eq!(align_traces(&bits("m"), &bits("h")), None);
        assert_eq!(align_traces(&bits("mm"), &bits("m")), None);
        assert_eq!(align_traces(&[], &bits("h")), None);
        assert_eq!(align_traces(&bits("h"), &bits("m")), Some(vec![RuntimeAction::Invalidate { at: 0, block: None }]));
        // a hit in front must come after the first access
        assert_eq!(align_traces(&bits("m"), &bits("hm")), None);
    }

    #[test]
    fn substitutions_only_where_needed() {
        assert_eq!(
            align_traces(&bits("mhh"), &bits("mhm")),
            Some(vec![RuntimeAction::Invalidate { at: 2, block: None }])
        );
        // "mh" -> "mhm": one insertion at the end
        assert_eq!(align_traces(&bits("mh"), &bits("mhm")), Some(vec![RuntimeAction::InjectMiss { at: 2 }]));
    }

    #[test]
    fn supersequence_is_lexicographically_greatest() {
        assert_eq!(bits_to_string(&shortest_supersequence(&bits("mh"), &bits("hm"))), "101");
        assert_eq!(bits_to_string(&shortest_supersequence(&bits("h"), &bits("m"))), "10");
        assert_eq!(shortest_supersequence(&[], &bits("mh")), bits("mh"));
    }

    /// A run starts cold: its first access misses.
    fn cold_run() -> impl Strategy<Value = Vec<bool>> {
        prop::collection::vec(any::<bool>(), 0..8).prop_map(|mut v| {
            if let Some(f) = v.first_mut() {
                *f = true;
            }
            v
        })
    }

    proptest! {
        #[test]
        fn alignment_reproduces_target(a in cold_run(),
                                       b in prop::collection::vec(any::<bool>(), 0..9)) {
            match align_traces(&a, &b) {
                Some(actions) => {
                    prop_assert!(actions.windows(2).all(|w| w[0].at() <= w[1].at()));
                    prop_assert_eq!(apply_actions(&run(&a), &actions).unwrap(), b.clone());
                    prop_assert!(actions.len() >= b.len() - a.len());
                }
                None => prop_assert!(!reachable(&a, &b, false)),
            }
        }

        #[test]
        fn supersequence_is_shortest(a in prop::collection::vec(any::<bool>(), 0..7),
                                     b in prop::collection::vec(any::<bool>(), 0..7)) {
            let s = shortest_supersequence(&a, &b);
            prop_assert!(is_subsequence(&a, &s) && is_subsequence(&b, &s));
            // no shorter string of any content contains both
            let k = s.len();
            if k > 0 {
                for v in 0..1u32 << (k - 1) {
                    let t: Vec<bool> = (0..k - 1).map(|x| v >> x & 1 == 1).collect();
                    prop_assert!(!(is_subsequence(&a, &t) && is_subsequence(&b, &t)));
                }
            }
            // lexicographically greatest among the shortest
            for v in 0..1u32 << k {
                let t: Vec<bool> = (0..k).map(|x| v >> (k - 1 - x) & 1 == 1).collect();
                if is_subsequence(&a, &t) && is_subsequence(&b, &t) {
                    prop_assert!(t <= s);
                }
            }
        }
    }
}
