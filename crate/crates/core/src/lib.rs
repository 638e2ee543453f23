//! Verification, patching and leakage measurement of cache side channels in
//! small imperative programs.
//!
//! A program is unrolled into a sequence of memory accesses whose cache
//! hits and misses are described symbolically. [`verify::run_cegar`] decides
//! whether all secret inputs give the attacker the same observation, using
//! an abstraction over set and tag equalities that is refined from unsat
//! cores. [`patch::run_monitoring`] enumerates the observation classes and
//! synthesizes runtime patches that merge them, and [`metrics`] measures
//! what an observation reveals. [`cache::oracle_classes`] is the exhaustive
//! ground truth behind all three.

pub mod cache;
pub mod corpus;
pub mod metrics;
pub mod patch;
pub mod program;
pub mod smt;
pub mod symbolic;
pub mod verify;

pub use cache::{oracle_classes, AttackModel, CacheConfig, Observation, OracleReport, Policy, RuntimeAction};
pub use metrics::{LogSum, Metrics, Prior};
pub use patch::{run_monitoring, MonitoringOutcome, Patch, PatchFix};
pub use program::{parse_program, Assignment, Program, Secret};
pub use smt::{Backend, SmtProcess};
pub use verify::{run_cegar, Verdict, VerificationOutcome};
