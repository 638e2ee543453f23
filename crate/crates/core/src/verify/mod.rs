//! The verifier: observation encodings, trace search with feasibility
//! checks, and the refinement loop.

mod cegar;
mod encode;
mod engine;

pub use cegar::{cegar_round, run_cegar, RoundResult, Verdict, VerificationOutcome};
pub use encode::{observation_eq, observation_of, read_vectors};
pub use engine::{Abstraction, CexTrace, Engine, Feasibility, RawTrace, VerifyError};
