use serde::{Deserialize, Serialize};

use super::eval::{eval, eval_bool, EvalError};
use super::value::State;
use crate::lang::{ControlPoint, Program, Provenance, Stmt, StmtKind};

/// Default number of loop back-edges a run may take.
pub const DEFAULT_FUEL: u64 = 1_000_000;

/// A statement about to execute, with the state before it. Loop heads are
/// recorded once per condition evaluation. Plain blocks are not recorded,
/// except the blocks that instrumentation inserted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub label: ControlPoint,
    pub state: State,
}

/// A failing execution: the initial state, the executed steps and the label
/// of the violated assertion (which is also the last step).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub initial: State,
    pub steps: Vec<Step>,
    pub failing: ControlPoint,
}

impl Counterexample {
    /// One JSON object per line, `{"label": .., "state": {..}}`.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("serializable step"));
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn visits(&self, label: ControlPoint) -> bool {
        self.steps.iter().any(|s| s.label == label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecutionResult {
    Terminated(State),
    Failed(Counterexample),
    /// An `assume` did not hold; such runs are discarded, never failures.
    Blocked,
    FuelExhausted,
    /// The state did not fit the program (missing or ill-typed variable).
    Stuck(EvalError),
}

impl ExecutionResult {
    pub fn is_failed(&self) -> bool {
        matches!(self, ExecutionResult::Failed(_))
    }

    pub fn failing(&self) -> Option<ControlPoint> {
        match self {
            ExecutionResult::Failed(c) => Some(c.failing),
            _ => None,
        }
    }
}

enum Stop {
    Failed(ControlPoint),
    Blocked,
    OutOfFuel,
    Stuck(EvalError),
}

impl From<EvalError> for Stop {
    fn from(e: EvalError) -> Self {
        Stop::Stuck(e)
    }
}

struct Machine<'t> {
    fuel: u64,
    trace: Option<&'t mut Vec<Step>>,
}

impl Machine<'_> {
    fn record(&mut self, label: ControlPoint, st: &State) {
        if let Some(t) = self.trace.as_deref_mut() {
            t.push(Step {
                label,
                state: st.clone(),
            });
        }
    }

    fn exec(&mut self, s: &Stmt, st: &mut State) -> Result<(), Stop> {
        if !matches!(s.kind, StmtKind::Block(_)) || matches!(s.prov, Provenance::Rewrite { .. }) {
            self.record(s.label, st);
        }
        match &s.kind {
            StmtKind::Skip => {}
            StmtKind::Assign { target, value } => {
                let v = eval(value, st)?;
                st.set(target, v);
            }
            StmtKind::Block(stmts) => {
                for c in stmts {
                    self.exec(c, st)?;
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                if eval_bool(cond, st)? {
                    self.exec(then_branch, st)?;
                } else {
                    self.exec(else_branch, st)?;
                }
            }
            StmtKind::While { cond, body } => {
                while eval_bool(cond, st)? {
                    self.exec(body, st)?;
                    if self.fuel == 0 {
                        return Err(Stop::OutOfFuel);
                    }
                    self.fuel -= 1;
                    self.record(s.label, st);
                }
            }
            StmtKind::Assert(c) => {
                if !eval_bool(c, st)? {
                    return Err(Stop::Failed(s.label));
                }
            }
            StmtKind::Assume(c) => {
                if !eval_bool(c, st)? {
                    return Err(Stop::Blocked);
                }
            }
        }
        Ok(())
    }
}

fn execute(p: &Program, initial: &State, fuel: u64, trace: Option<&mut Vec<Step>>) -> Result<State, Stop> {
    let mut m = Machine { fuel, trace };
    let mut st = initial.clone();
    m.exec(&p.body, &mut st)?;
    Ok(st)
}

/// Runs `p` from `initial`. Failed runs carry their full trace.
pub fn run(p: &Program, initial: &State, fuel: u64) -> ExecutionResult {
    match execute(p, initial, fuel, None) {
        Ok(st) => ExecutionResult::Terminated(st),
        Err(Stop::Failed(_)) => run_traced(p, initial, fuel).0,
        Err(Stop::Blocked) => ExecutionResult::Blocked,
        Err(Stop::OutOfFuel) => ExecutionResult::FuelExhausted,
        Err(Stop::Stuck(e)) => ExecutionResult::Stuck(e),
    }
}

/// Runs `p` recording every executed step.
pub fn run_traced(p: &Program, initial: &State, fuel: u64) -> (ExecutionResult, Vec<Step>) {
    let mut steps = Vec::new();
    let r = execute(p, initial, fuel, Some(&mut steps));
    let res = match r {
        Ok(st) => ExecutionResult::Terminated(st),
        Err(Stop::Failed(label)) => ExecutionResult::Failed(Counterexample {
            initial: initial.clone(),
            steps: steps.clone(),
            failing: label,
        }),
        Err(Stop::Blocked) => ExecutionResult::Blocked,
        Err(Stop::OutOfFuel) => ExecutionResult::FuelExhausted,
        Err(Stop::Stuck(e)) => ExecutionResult::Stuck(e),
    };
    (res, steps)
}

/// Whether `cex` is exactly what `p` does from `cex.initial`.
pub fn replays(p: &Program, cex: &Counterexample) -> bool {
    match run_traced(p, &cex.initial, DEFAULT_FUEL).0 {
        ExecutionResult::Failed(c) => c == *cex,
        _ => false,
    }
}
