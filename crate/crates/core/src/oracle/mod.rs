//! Deciding correctness of normalized programs with an external SMT solver.

pub mod candidates;
pub mod encode;
pub mod engine;
pub mod smt;
pub mod smt_certify;

pub use engine::{is_correct, validate_witness, OracleConfig, WitnessCheck};
pub use smt::{SolverConfig, SolverError};

use crate::instrument::Witness;
use crate::interp::Counterexample;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Safe(Witness),
    Unsafe(Counterexample),
    Unknown(String),
}
