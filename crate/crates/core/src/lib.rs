//! Counterexample-guided instrumentation of array programs with ghost code.
//!
//! Programs in a small imperative language with arrays, quantifiers and
//! aggregates are rewritten by instrumentation operators so that a
//! quantifier-free back-end can prove them.

pub mod cli;
pub mod lang;
pub mod instrument;
pub mod interp;
pub mod opslib;
pub mod oracle;
pub mod search;
