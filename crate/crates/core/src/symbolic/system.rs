//! The constraint system of a program under a cache configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::gamma::{build, Atoms};
use super::universe::{universe, PredId, PredKind};
use crate::cache::CacheConfig;
use crate::program::UnrolledTrace;
use crate::smt::term::dag_size_of;
use crate::smt::{BvOp, Sort, Term};

/// Default bound on the number of distinct term nodes in a system.
pub const DEFAULT_NODE_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SymbolicError {
    #[error("constraint system has {nodes} nodes; the limit is {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
}

pub fn miss_var(i: usize) -> Term {
    Term::var(format!("miss.{i}"), Sort::Bool)
}

pub fn guard_var(i: usize) -> Term {
    Term::var(format!("guard.{i}"), Sort::Bool)
}

pub fn eta_var(j: usize, i: usize) -> Term {
    Term::var(format!("eta.{j}.{i}"), Sort::Bool)
}

#[derive(Debug, Clone)]
pub struct SymbolicSystem {
    pub cfg: CacheConfig,
    pub trace: UnrolledTrace,
    pub universe: Vec<PredId>,
    /// Defining formula of every predicate, over the secrets.
    pub defs: BTreeMap<PredId, Term>,
    /// Program and cache semantics over predicate, guard, miss and eta
    /// variables. Predicates are left unconstrained.
    pub psi: Vec<Term>,
    /// Abstract miss condition per access, `gamma[i - 1]`.
    pub gamma: Vec<Term>,
    pub eta_defs: Vec<((usize, usize), Term)>,
    /// Miss conditions over the secrets only.
    pub ground_gamma: Vec<Term>,
    /// Guards over the secrets only.
    pub ground_guard: Vec<Term>,
}

pub fn execute_symbolic(trace: &UnrolledTrace, cfg: &CacheConfig) -> Result<SymbolicSystem, SymbolicError> {
    execute_symbolic_with_limit(trace, cfg, DEFAULT_NODE_LIMIT)
}

pub fn execute_symbolic_with_limit(
    trace: &UnrolledTrace,
    cfg: &CacheConfig,
    node_limit: usize,
) -> Result<SymbolicSystem, SymbolicError> {
    let n = trace.len();
    let b = Term::bv(32, cfg.line_bits() as u64);
    let bs = Term::bv(32, (cfg.line_bits() + cfg.set_bits()) as u64);
    let set_mask = Term::bv(32, cfg.sets as u64 - 1);
    let sets: Vec<Term> = trace
        .accesses
        .iter()
        .map(|a| Term::bvop(BvOp::And, &Term::bvop(BvOp::Lshr, &a.address, &b), &set_mask))
        .collect();
    let tags: Vec<Term> = trace.accesses.iter().map(|a| Term::bvop(BvOp::Lshr, &a.address, &bs)).collect();

    let universe = universe(n);
    let defs: BTreeMap<PredId, Term> = universe
        .iter()
        .map(|p| {
            let d = match p.kind {
                PredKind::Set => sets[p.j - 1].eq_to(&sets[p.i - 1]),
                PredKind::Tag => tags[p.j - 1].eq_to(&tags[p.i - 1]).not(),
            };
            (*p, d)
        })
        .collect();
    let ground_guard: Vec<Term> = trace.accesses.iter().map(|a| a.guard.clone()).collect();

    let set_var = |j: usize, i: usize| PredId::set(j, i).var();
    let tag_var = |j: usize, i: usize| PredId::tag(j, i).var();
    let abstract_parts = build(
        n,
        cfg,
        &Atoms { set: &set_var, tag: &tag_var, guard: &guard_var, miss_var: Some(&miss_var), eta_var: Some(&eta_var) },
    );

    let set_def = |j: usize, i: usize| defs[&PredId::set(j, i)].clone();
    let tag_def = |j: usize, i: usize| defs[&PredId::tag(j, i)].clone();
    let guard_def = |k: usize| ground_guard[k - 1].clone();
    let ground =
        build(n, cfg, &Atoms { set: &set_def, tag: &tag_def, guard: &guard_def, miss_var: None, eta_var: None });

    let mut psi = Vec::with_capacity(3 * n + abstract_parts.eta_defs.len());
    for (k, g) in ground_guard.iter().enumerate() {
        psi.push(guard_var(k + 1).iff(g));
    }
    for ((j, i), body) in &abstract_parts.eta_defs {
        psi.push(eta_var(*j, *i).iff(body));
    }
    for (k, g) in abstract_parts.gamma.iter().enumerate() {
        let m = miss_var(k + 1);
        psi.push(g.implies(&m));
        psi.push(g.not().implies(&m.not()));
    }

    let sys = SymbolicSystem {
        cfg: *cfg,
        trace: trace.clone(),
        universe,
        defs,
        psi,
        gamma: abstract_parts.gamma,
        eta_defs: abstract_parts.eta_defs,
        ground_gamma: ground.gamma,
        ground_guard,
    };
    let nodes = sys.node_count();
    if nodes > node_limit {
        return Err(SymbolicError::TooLarge { nodes, limit: node_limit });
    }
    Ok(sys)
}

impl SymbolicSystem {
    pub fn len(&self) -> usize {
        self.trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.is_empty()
    }

    /// Distinct nodes over psi, predicate definitions and ground terms.
    pub fn node_count(&self) -> usize {
        let mut roots: Vec<Term> = self.psi.clone();
        roots.extend(self.defs.values().cloned());
        roots.extend(self.ground_gamma.iter().cloned());
        dag_size_of(&roots)
    }

    /// `p <=> def(p)`; folds to a literal for predicates between constant addresses.
    pub fn def_constraint(&self, p: &PredId) -> Term {
        p.var().iff(&self.defs[p])
    }

    /// Psi plus the definitions of the tracked predicates; the others stay free.
    pub fn rewrite(&self, tracked: &BTreeSet<PredId>) -> Result<Vec<Term>, SymbolicError> {
        let mut f = self.psi.clone();
        for p in tracked {
            if !self.defs.contains_key(p) {
                return Err(SymbolicError::UnknownPredicate(p.to_string()));
            }
            f.push(self.def_constraint(p));
        }
        Ok(f)
    }

    /// Predicates with a statically known value: every predicate `rho_ji`
    /// such that `r_1 .. r_i` all have constant addresses.
    pub fn initial_abstraction(&self) -> BTreeSet<PredId> {
        let prefix = self.trace.accesses.iter().take_while(|a| a.const_address.is_some()).count();
        self.universe.iter().filter(|p| p.i <= prefix).copied().collect()
    }

    /// Folded value of a predicate, when its definition is a literal.
    pub fn static_value(&self, p: &PredId) -> Option<bool> {
        self.defs[p].as_bool_lit()
    }

    /// One line per predicate, then one per access.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cache {}", self.cfg);
        let _ = writeln!(out, "accesses {}", self.len());
        let _ = writeln!(out, "predicates {}", self.universe.len());
        for p in &self.universe {
            let kind = match p.kind {
                PredKind::Set => "set",
                PredKind::Tag => "tag",
            };
            let value = match self.static_value(p) {
                Some(v) => v.to_string(),
                None => "symbolic".to_string(),
            };
            let _ = writeln!(out, "pred {p} j={} i={} kind={kind} value={value}", p.j, p.i);
        }
        for (k, a) in self.trace.accesses.iter().enumerate() {
            let _ = writeln!(
                out,
                "access {} {} guard={} address={} gamma={}",
                k + 1,
                a.array,
                a.guard,
                a.address,
                self.gamma[k]
            );
        }
        out
    }
}
