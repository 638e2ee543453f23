//! Miss conditions per replacement policy.
//!
//! For access `r_i` with guard `g_i`:
//!
//! * `cold_i  = AND_{j<i} (!set_ji | tag_ji | !g_j)`: no earlier executed
//!   access touched the block of `r_i`.
//! * direct-mapped: `g_i & (cold_i | OR_{j<i} (tag_ji & set_ji & rel_ji & g_j))`
//!   with `rel_ji = AND_{j<k<i} (tag_ki | !set_ki | !g_k)`.
//! * LRU and FIFO: `g_i & (cold_i | SUM_{j<i} eta_ji >= assoc)` with
//!   `eta_ji = cnf_ji & rel_ji & eqv_ji & g_j`, where `eqv_ji` keeps only the
//!   last access to each conflicting block. FIFO conjoins `miss_j` into
//!   `cnf_ji` and adds a `!miss_k` escape to the clauses of `rel` and `eqv`,
//!   since only misses insert blocks.
//!
//! The same builder produces the abstract system (predicates, guards,
//! misses and `eta` as variables) and the ground system (everything
//! expanded over the secrets).

use crate::cache::{CacheConfig, Policy};
use crate::smt::{CmpOp, Term};

pub(crate) struct Atoms<'a> {
    pub set: &'a dyn Fn(usize, usize) -> Term,
    pub tag: &'a dyn Fn(usize, usize) -> Term,
    pub guard: &'a dyn Fn(usize) -> Term,
    /// `Some` names miss and eta variables; `None` inlines their definitions.
    pub miss_var: Option<&'a dyn Fn(usize) -> Term>,
    pub eta_var: Option<&'a dyn Fn(usize, usize) -> Term>,
}

pub(crate) struct Gammas {
    /// `gamma[i - 1]` is the miss condition of `r_i`.
    pub gamma: Vec<Term>,
    /// `((j, i), body)`: definitions of the named eta variables.
    pub eta_defs: Vec<((usize, usize), Term)>,
}

pub(crate) fn build(n: usize, cfg: &CacheConfig, atoms: &Atoms<'_>) -> Gammas {
    let fifo = cfg.policy == Policy::Fifo;
    let assoc = cfg.policy != Policy::Direct;
    let mut gamma: Vec<Term> = Vec::with_capacity(n);
    let mut eta_defs = Vec::new();
    // eqv[j - 1] = AND_{j<k<i} clause(j, k) for the current i
    let mut eqv: Vec<Term> = Vec::with_capacity(n);

    let miss = |gamma: &[Term], j: usize| -> Term {
        match atoms.miss_var {
            Some(v) => v(j),
            None => gamma[j - 1].clone(),
        }
    };
    // the blocks of r_a and r_b differ, or r_who did not execute (or, with
    // `with_miss`, did not miss)
    let clause = |gamma: &[Term], a: usize, b: usize, who: usize, with_miss: bool| -> Term {
        let mut parts = vec![(atoms.tag)(a, b), (atoms.set)(a, b).not(), (atoms.guard)(who).not()];
        if with_miss {
            parts.push(miss(gamma, who).not());
        }
        Term::or(parts)
    };

    for i in 1..=n {
        let g_i = (atoms.guard)(i);
        let cold = Term::and((1..i).map(|j| clause(&gamma, j, i, j, false)));

        if assoc {
            // extend eqv chains: eqv_j(i) = eqv_j(i-1) & clause(j, i-1)
            if i >= 2 {
                for j in 1..i - 1 {
                    let c = clause(&gamma, j, i - 1, i - 1, fifo);
                    eqv[j - 1] = eqv[j - 1].and2(&c);
                }
                eqv.push(Term::tt());
            }
        }

        let mut rel = Term::tt();
        let mut conflicts = Vec::with_capacity(i.saturating_sub(1));
        for j in (1..i).rev() {
            if j + 1 < i {
                rel = clause(&gamma, j + 1, i, j + 1, fifo).and2(&rel);
            }
            let mut cnf = vec![(atoms.tag)(j, i), (atoms.set)(j, i)];
            if fifo {
                cnf.push(miss(&gamma, j));
            }
            cnf.push(rel.clone());
            if assoc {
                cnf.push(eqv[j - 1].clone());
            }
            cnf.push((atoms.guard)(j));
            conflicts.push((j, Term::and(cnf)));
        }
        conflicts.reverse();

        let conflict_miss = if assoc {
            let mut counted = Vec::with_capacity(conflicts.len());
            for (j, body) in conflicts {
                let eta = match atoms.eta_var {
                    Some(v) => {
                        eta_defs.push(((j, i), body));
                        v(j, i)
                    }
                    None => body,
                };
                counted.push(eta.indicator());
            }
            Term::int_cmp(CmpOp::Ge, &Term::int_add(counted), &Term::int(cfg.assoc as i64))
        } else {
            Term::or(conflicts.into_iter().map(|(_, b)| b))
        };
        gamma.push(g_i.and2(&cold.or2(&conflict_miss)));
    }
    Gammas { gamma, eta_defs }
}
