//! Instrumentation operators, their application to programs, and the
//! translation of verification results between instrumented and original
//! programs.

pub mod apply;
pub mod certify;
pub mod matching;
pub mod operator;
pub mod project;
pub mod witness;

pub use apply::{apply_selection, Instrumented, Selection, SelectionError};
pub use certify::{certify_operator, CertifyConfig, ConditionEntry, ConditionReport};
pub use matching::{applicable_points, match_rule, resolve, space_size, Applicable};
pub use operator::{GhostVar, InstrumentationOperator, MetaKind, RewriteRule};
pub use project::{project_counterexample, project_steps, ProjectError};
pub use witness::{back_translate_witness, Invariant, Witness};
