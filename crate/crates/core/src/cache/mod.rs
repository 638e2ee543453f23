//! Cache geometry, concrete simulation, attacker observations, runtime
//! actions and the exhaustive oracle.

mod config;
mod observe;
mod oracle;
mod sim;

pub use config::{CacheConfig, ConfigError, Mapped, Policy};
pub use observe::{apply_actions, bits_to_string, observe, ActionError, AttackModel, Observation, RuntimeAction};
pub use oracle::{oracle_classes, patched_observation, run_program, InputRecord, OracleError, OracleReport, RunAccess};
pub use sim::{simulate, CacheState};
