//! Terms, SMT-LIB 2 emission and the external solver interface.

pub mod emit;
pub mod sexpr;
pub mod solver;
pub mod term;

pub use emit::{term_to_string, ScriptBuilder, SharedForm};
pub use solver::{
    minimize_core, Answer, Backend, Model, Query, Session, SmtProcess, SolveResult, SolverError, SolverStats,
    DEFAULT_TIMEOUT, SOLVER_ENV,
};
pub use term::{BvOp, CmpOp, EvalError, Formula, Node, Sort, Term, Value};
