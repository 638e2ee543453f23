//! Benchmark fixtures shared by the bench targets.

use cachevet_core::cache::{AttackModel, CacheConfig};
use cachevet_core::corpus::{corpus_caches, desk_cache, ex_a, ex_b, random_program};
use cachevet_core::Program;

/// A named verification or patching workload.
pub struct Workload {
    pub name: String,
    pub program: Program,
    pub cache: CacheConfig,
    pub model: AttackModel,
}

/// The two desk programs on the desk cache plus a few random programs on
/// the 2-way LRU corpus cache, under both attack models.
pub fn workloads() -> Vec<Workload> {
    let mut out = Vec::new();
    for model in [AttackModel::Time, AttackModel::Trace] {
        for (name, program) in [("exA", ex_a()), ("exB", ex_b())] {
            out.push(Workload { name: format!("{name}/{model}"), program, cache: desk_cache(), model });
        }
        for seed in [1u64, 2, 5] {
            out.push(Workload {
                name: format!("seed{seed}-lru/{model}"),
                program: random_program(seed),
                cache: corpus_caches()[1],
                model,
            });
        }
    }
    out
}

/// Deterministic cold-start hit/miss runs for the alignment benchmarks.
pub fn runs(count: usize, len: usize) -> Vec<Vec<bool>> {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    (0..count)
        .map(|_| {
            (0..len)
                .map(|k| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    k == 0 || state & 1 == 1
                })
                .collect()
        })
        .collect()
}
