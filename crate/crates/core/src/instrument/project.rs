//! Mapping failing runs of an instrumented program back to the original.

use super::apply::Instrumented;
use crate::interp::{Counterexample, Step};
use crate::lang::{ControlPoint, Provenance};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProjectError {
    #[error("the failing assertion {0} was inserted by instrumentation")]
    NotOriginalAssert(ControlPoint),
}

/// Keeps the steps at original statements (a replacement block standing for
/// the statement it replaced) and drops the ghost variables from every state.
pub fn project_counterexample(
    cex: &Counterexample,
    inst: &Instrumented,
) -> Result<Counterexample, ProjectError> {
    if !inst.is_original(cex.failing) {
        return Err(ProjectError::NotOriginalAssert(cex.failing));
    }
    Ok(Counterexample {
        initial: cex.initial.without(&inst.ghost_set()),
        steps: project_steps(&cex.steps, inst),
        failing: cex.failing,
    })
}

/// The steps of any run of `P_r` as seen by the original program.
pub fn project_steps(steps: &[Step], inst: &Instrumented) -> Vec<Step> {
    let ghosts = inst.ghost_set();
    steps
        .iter()
        .filter_map(|s| {
            let label = match inst.provenance.get(&s.label) {
                Some(Provenance::Original) => s.label,
                Some(Provenance::Rewrite { point, .. }) if inst.ins.get(point) == Some(&s.label) => *point,
                _ => return None,
            };
            Some(Step {
                label,
                state: s.state.without(&ghosts),
            })
        })
        .collect()
}
