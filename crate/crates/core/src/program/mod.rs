//! The analyzed input language: syntax, parsing, unrolling into guarded
//! accesses, concrete execution and secret enumeration.

mod ast;
mod enumerate;
mod interp;
mod parse;
mod print;
mod unroll;

pub use ast::*;
pub use enumerate::{enumerate_secrets, SecretDomain, ENUMERATION_LIMIT_BITS};
pub use interp::{run_concrete, Executed};
pub use parse::parse_program;
pub use unroll::{
    secret_var, secret_var_name, unroll, unroll_with_limit, AccessSite, Assignment, UnrolledTrace, DEFAULT_UNROLL_LIMIT,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("{line}:{col}: unknown identifier `{name}`")]
    Unknown { line: u32, col: u32, name: String },
    #[error("{line}:{col}: loop bounds must be integer literals")]
    NonConstBound { line: u32, col: u32 },
    #[error("{line}:{col}: {msg}")]
    Type { line: u32, col: u32, msg: String },
    #[error("arrays `{0}` and `{1}` overlap")]
    Overlap(String, String),
    #[error("array `{name}`: base {base:#x} is not a multiple of the element size {elem_size}")]
    Misaligned { name: String, base: u64, elem_size: u64 },
    #[error("unrolled program has {count} accesses; the limit is {limit}")]
    TooManyAccesses { count: u64, limit: usize },
    #[error("unrolling exceeds {limit} loop iterations")]
    TooManyIterations { limit: u64 },
    #[error("secrets span {bits} bits; enumeration is limited to {limit}")]
    EnumerationLimit { bits: u32, limit: u32 },
    #[error("bad secret assignment `{text}`: {msg}")]
    Assignment { text: String, msg: String },
}
