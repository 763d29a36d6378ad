//! Concrete interpreter: the ground truth for every property test and for
//! counterexample replay.

pub mod enumerate;
pub mod eval;
pub mod exec;
pub mod homs;
pub mod value;

pub use enumerate::{default_state, enumerate_check, enumerate_check_fuel, initial_states, ArrayDomain, Bounds, Domain};
pub use eval::{eval, eval_bool, EvalError};
pub use exec::{replays, run, run_traced, Counterexample, ExecutionResult, Step, DEFAULT_FUEL};
pub use homs::aggregate_value;
pub use value::{ArrayValue, State, Value};
