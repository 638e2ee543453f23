//! Symbolic cache semantics: the predicate universe, per-policy miss
//! conditions and the abstraction-aware constraint system.

mod gamma;
mod system;
mod universe;

pub use system::{
    eta_var, execute_symbolic, execute_symbolic_with_limit, guard_var, miss_var, SymbolicError, SymbolicSystem,
    DEFAULT_NODE_LIMIT,
};
pub use universe::{universe, PredId, PredKind};
