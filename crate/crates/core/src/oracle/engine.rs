//! The correctness oracle: concrete sampling, invariant inference by
//! Houdini over sampled candidates, bounded model checking with replay of
//! the solver's counterexamples, and k-induction.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::time::{Duration, Instant};

use super::candidates::{generate, sample, SampleConfig};
use super::encode::{encode, read_state, EncodeError, HavocPolicy, Location, TransitionSystem};
use super::smt::{value_term, SatResult, Session, SolverConfig, SolverError};
use super::Verdict;
use crate::instrument::{Invariant, Witness};
use crate::interp::{run_traced, ExecutionResult, State, DEFAULT_FUEL};
use crate::lang::{ControlPoint, Expr, Program, Type};

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub solver: SolverConfig,
    pub bmc_depth: usize,
    pub max_k: usize,
    pub policy: HavocPolicy,
    pub sampling: SampleConfig,
    /// Spurious solver counterexamples tolerated before bounded model
    /// checking gives up.
    pub spurious_cap: usize,
    /// Wall-clock budget for bounded model checking in one oracle call.
    pub bmc_budget: Duration,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            solver: SolverConfig::default(),
            bmc_depth: 40,
            max_k: 10,
            policy: HavocPolicy::default(),
            sampling: SampleConfig::default(),
            spurious_cap: 4,
            bmc_budget: Duration::from_secs(20),
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum OracleError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

/// Decides whether every assertion of `p` holds on every execution.
pub fn is_correct(p: &Program, cfg: &OracleConfig) -> Verdict {
    let samples = sample(p, &cfg.sampling);
    if let Some(cex) = samples.failure {
        return Verdict::Unsafe(cex);
    }
    match decide(p, cfg, &samples) {
        Ok(v) => v,
        Err(e) => Verdict::Unknown(e.to_string()),
    }
}

fn decide(p: &Program, cfg: &OracleConfig, samples: &super::candidates::Samples) -> Result<Verdict, OracleError> {
    let ts = encode(p, cfg.policy)?;
    let cands = generate(p, samples);
    let invariants = houdini(&ts, &cands, cfg)?;
    let inv_terms = InvTerms::new(&ts, &invariants);
    if let Some(true) = inv_terms.proves_safety(&ts, &cfg.solver)? {
        let small = minimize(&ts, &invariants, cfg)?;
        return Ok(Verdict::Safe(witness(&small, 1)));
    }
    let bmc = bmc(p, &ts, cfg)?;
    match bmc {
        Bmc::Unsafe(v) => return Ok(v),
        Bmc::Terminates => return Ok(Verdict::Safe(witness(&invariants, 0))),
        Bmc::Clean(_) => {}
    }
    let Bmc::Clean(depth) = bmc else { unreachable!() };
    for k in 2..=cfg.max_k.min(depth + 1) {
        if k_induction(&ts, &inv_terms, k, &cfg.solver)? == Some(true) {
            return Ok(Verdict::Safe(witness(&invariants, k as u32)));
        }
    }
    let why = if ts.havocked {
        "not proved; some operations were approximated"
    } else {
        "not proved"
    };
    Ok(Verdict::Unknown(why.into()))
}

fn witness(inv: &BTreeMap<ControlPoint, Vec<Expr>>, k: u32) -> Witness {
    Witness {
        invariants: inv
            .iter()
            .map(|(p, es)| (*p, Invariant::plain(Expr::conj(es.clone()))))
            .collect(),
        k,
    }
}

/// Candidate formulas rendered at steps 0 and 1.
struct Rendered {
    loc: Location,
    expr: Expr,
    at0: String,
    at1: String,
}

fn render_candidates(
    ts: &TransitionSystem,
    cands: &BTreeMap<ControlPoint, Vec<Expr>>,
) -> Vec<Rendered> {
    let mut out = Vec::new();
    for (head, es) in cands {
        for (k, e) in es.iter().enumerate() {
            let tag = format!("c{}_{k}", head.0);
            let (Ok((d0, at0)), Ok((d1, at1))) = (
                ts.state_formula(e, 0, HavocPolicy::exact(), &tag),
                ts.state_formula(e, 1, HavocPolicy::exact(), &tag),
            ) else {
                continue;
            };
            if d0.is_empty() && d1.is_empty() {
                out.push(Rendered {
                    loc: Location::Head(*head),
                    expr: e.clone(),
                    at0,
                    at1,
                });
            }
        }
    }
    out
}

fn conj(parts: &[String]) -> String {
    match parts.len() {
        0 => "true".into(),
        1 => parts[0].clone(),
        _ => format!("(and {})", parts.join(" ")),
    }
}

fn disj(parts: &[String]) -> String {
    match parts.len() {
        0 => "false".into(),
        1 => parts[0].clone(),
        _ => format!("(or {})", parts.join(" ")),
    }
}

/// Source locations of a single step: entry (in an initial state) or a loop head.
fn premise(ts: &TransitionSystem, step: usize, hyp: &BTreeMap<Location, String>) -> String {
    let mut locs = Vec::new();
    let mut parts = Vec::new();
    for l in &ts.locations {
        if *l == Location::Exit {
            continue;
        }
        locs.push(ts.at(step, *l));
        let h = match l {
            Location::Entry => ts.init(step),
            _ => hyp.get(l).cloned().unwrap_or_else(|| "true".into()),
        };
        parts.push(format!("(=> {} {h})", ts.at(step, *l)));
    }
    parts.push(disj(&locs));
    conj(&parts)
}

/// Greatest subset of the candidates that is inductive relative to the
/// initial states.
fn houdini(
    ts: &TransitionSystem,
    cands: &BTreeMap<ControlPoint, Vec<Expr>>,
    cfg: &OracleConfig,
) -> Result<BTreeMap<ControlPoint, Vec<Expr>>, OracleError> {
    let mut alive = render_candidates(ts, cands);
    if alive.is_empty() {
        return Ok(BTreeMap::new());
    }
    let mut s = Session::start(&cfg.solver)?;
    s.send(&ts.declare_step(0))?;
    s.send(&ts.declare_step(1))?;
    s.send(&format!("(assert {})", ts.trans(0)))?;
    loop {
        let mut hyp: BTreeMap<Location, Vec<String>> = BTreeMap::new();
        for c in &alive {
            hyp.entry(c.loc).or_default().push(c.at0.clone());
        }
        let hyp: BTreeMap<Location, String> = hyp.into_iter().map(|(l, v)| (l, conj(&v))).collect();
        let mut goal = Vec::new();
        for c in &alive {
            goal.push(format!("(and {} (not {}))", ts.at(1, c.loc), c.at1));
        }
        s.push()?;
        s.send(&format!("(assert {})", premise(ts, 0, &hyp)))?;
        s.send(&format!("(assert {})", disj(&goal)))?;
        match s.check()? {
            SatResult::Unsat => {
                s.pop()?;
                break;
            }
            SatResult::Unknown(_) => {
                s.pop()?;
                alive.clear();
                break;
            }
            SatResult::Sat => {
                let terms: Vec<String> = alive
                    .iter()
                    .map(|c| format!("(and {} (not {}))", ts.at(1, c.loc), c.at1))
                    .collect();
                let vals = s.values(&terms)?;
                s.pop()?;
                let before = alive.len();
                let mut keep = vals.iter().map(|v| v.atom() != Some("true"));
                alive.retain(|_| keep.next().unwrap_or(true));
                if alive.len() == before {
                    // The model did not refute any single candidate; give up.
                    alive.clear();
                    break;
                }
            }
        }
        if alive.is_empty() {
            break;
        }
    }
    let mut out: BTreeMap<ControlPoint, Vec<Expr>> = BTreeMap::new();
    for c in alive {
        if let Location::Head(h) = c.loc {
            out.entry(h).or_default().push(c.expr);
        }
    }
    Ok(out)
}

/// Drops conjuncts, latest first, while the rest stays inductive and
/// excludes failures.
fn minimize(
    ts: &TransitionSystem,
    inv: &BTreeMap<ControlPoint, Vec<Expr>>,
    cfg: &OracleConfig,
) -> Result<BTreeMap<ControlPoint, Vec<Expr>>, OracleError> {
    let mut alive = render_candidates(ts, inv);
    let mut s = Session::start(&cfg.solver)?;
    s.send(&ts.declare_step(0))?;
    s.send(&ts.declare_step(1))?;
    s.send(&format!("(assert {})", ts.trans(0)))?;
    // Failures are not successor states, so safety gets its own session.
    let mut safety = Session::start(&cfg.solver)?;
    safety.send(&ts.declare_step(0))?;
    safety.send(&format!("(assert {})", ts.error(0)))?;
    for k in (0..alive.len()).rev() {
        let rest: Vec<&Rendered> = alive.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, c)| c).collect();
        let mut hyp: BTreeMap<Location, Vec<String>> = BTreeMap::new();
        for c in &rest {
            hyp.entry(c.loc).or_default().push(c.at0.clone());
        }
        let hyp: BTreeMap<Location, String> = hyp.into_iter().map(|(l, v)| (l, conj(&v))).collect();
        let goal: Vec<String> = rest
            .iter()
            .map(|c| format!("(and {} (not {}))", ts.at(1, c.loc), c.at1))
            .collect();
        let pre = format!("(assert {})", premise(ts, 0, &hyp));
        safety.push()?;
        safety.send(&pre)?;
        let safe = safety.check()?;
        safety.pop()?;
        if safe != SatResult::Unsat {
            continue;
        }
        s.push()?;
        s.send(&pre)?;
        s.send(&format!("(assert {})", disj(&goal)))?;
        let r = s.check()?;
        s.pop()?;
        if r == SatResult::Unsat {
            alive.remove(k);
        }
    }
    let mut out: BTreeMap<ControlPoint, Vec<Expr>> = inv.keys().map(|h| (*h, Vec::new())).collect();
    for c in alive {
        if let Location::Head(h) = c.loc {
            out.entry(h).or_default().push(c.expr);
        }
    }
    Ok(out)
}

/// The inferred invariants rendered per step, with helper declarations.
struct InvTerms {
    by_loc: BTreeMap<Location, Vec<Expr>>,
}

impl InvTerms {
    fn new(_ts: &TransitionSystem, inv: &BTreeMap<ControlPoint, Vec<Expr>>) -> InvTerms {
        InvTerms {
            by_loc: inv.iter().map(|(h, es)| (Location::Head(*h), es.clone())).collect(),
        }
    }

    fn at(&self, ts: &TransitionSystem, step: usize) -> Result<BTreeMap<Location, String>, OracleError> {
        let mut out = BTreeMap::new();
        for (l, es) in &self.by_loc {
            let mut parts = Vec::new();
            for (k, e) in es.iter().enumerate() {
                let (d, t) = ts.state_formula(e, step, HavocPolicy::exact(), &format!("inv{k}"))?;
                if d.is_empty() {
                    parts.push(t);
                }
            }
            out.insert(*l, conj(&parts));
        }
        Ok(out)
    }

    /// Whether no assertion fails in one step from an invariant state.
    fn proves_safety(&self, ts: &TransitionSystem, solver: &SolverConfig) -> Result<Option<bool>, OracleError> {
        let mut s = Session::start(solver)?;
        s.send(&ts.declare_step(0))?;
        s.send(&format!("(assert {})", premise(ts, 0, &self.at(ts, 0)?)))?;
        s.send(&format!("(assert {})", ts.error(0)))?;
        Ok(match s.check()? {
            SatResult::Unsat => Some(true),
            SatResult::Sat => Some(false),
            SatResult::Unknown(_) => None,
        })
    }
}

enum Bmc {
    Unsafe(Verdict),
    /// Every execution ends within the unrolling and none fails.
    Terminates,
    /// No failure up to the given depth.
    Clean(usize),
}

fn block_inputs(ts: &TransitionSystem, init: &State) -> String {
    let mut parts = Vec::new();
    for v in &ts.inputs {
        if let Some(val) = init.get(v) {
            parts.push(format!("(= {} {})", TransitionSystem::var(v, 0), value_term(val)));
        }
    }
    format!("(assert (not {}))", conj(&parts))
}

fn input_vars(ts: &TransitionSystem) -> Vec<(String, Type)> {
    ts.vars.iter().filter(|(v, _)| ts.inputs.contains(v)).cloned().collect()
}

fn bmc(p: &Program, ts: &TransitionSystem, cfg: &OracleConfig) -> Result<Bmc, OracleError> {
    let mut s = Session::start(&cfg.solver)?;
    s.send(&ts.declare_step(0))?;
    s.send(&format!("(assert {})", ts.init(0)))?;
    let mut spurious = 0;
    let inputs = input_vars(ts);
    let base = crate::interp::default_state(p);
    let start = Instant::now();
    for depth in 0..=cfg.bmc_depth {
        if start.elapsed() > cfg.bmc_budget {
            return Ok(Bmc::Clean(depth.saturating_sub(1)));
        }
        loop {
            s.push()?;
            s.send(&format!("(assert {})", ts.error(depth)))?;
            let r = s.check()?;
            if r != SatResult::Sat {
                s.pop()?;
                if let SatResult::Unknown(why) = r {
                    let _ = why;
                    return Ok(Bmc::Clean(depth.saturating_sub(1)));
                }
                break;
            }
            let model = read_state(&mut s, &inputs, 0)?;
            s.pop()?;
            let mut init = base.clone();
            for (k, v) in &model.0 {
                init.set(k, v.clone());
            }
            if let (ExecutionResult::Failed(c), _) = run_traced(p, &init, DEFAULT_FUEL) {
                return Ok(Bmc::Unsafe(Verdict::Unsafe(c)));
            }
            spurious += 1;
            if spurious > cfg.spurious_cap {
                return Ok(Bmc::Clean(depth.saturating_sub(1)));
            }
            s.send(&block_inputs(ts, &model))?;
        }
        s.send(&ts.declare_step(depth + 1))?;
        s.send(&format!("(assert {})", ts.trans(depth)))?;
        if s.check()? == SatResult::Unsat {
            return Ok(Bmc::Terminates);
        }
    }
    Ok(Bmc::Clean(cfg.bmc_depth))
}

/// Whether `k` consecutive failure-free steps through invariant states
/// exclude a failure in the next step.
fn k_induction(
    ts: &TransitionSystem,
    inv: &InvTerms,
    k: usize,
    solver: &SolverConfig,
) -> Result<Option<bool>, OracleError> {
    let mut s = Session::start(solver)?;
    let mut script = String::new();
    for j in 0..=k {
        script.push_str(&ts.declare_step(j));
        let _ = writeln!(script, "(assert {})", premise(ts, j, &inv.at(ts, j)?));
    }
    for j in 0..k {
        let _ = writeln!(script, "(assert {})", ts.trans(j));
        let _ = writeln!(script, "(assert (not {}))", ts.error(j));
    }
    let _ = writeln!(script, "(assert {})", ts.error(k));
    s.send(&script)?;
    Ok(match s.check()? {
        SatResult::Unsat => Some(true),
        SatResult::Sat => Some(false),
        SatResult::Unknown(_) => None,
    })
}

/// Outcome of checking a witness against a program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessCheck {
    /// Initial states satisfy the invariants and every step preserves them.
    pub inductive: Option<bool>,
    /// No assertion fails in a step from an invariant state.
    pub safe: Option<bool>,
}

impl WitnessCheck {
    pub fn valid(&self) -> bool {
        self.inductive == Some(true) && self.safe == Some(true)
    }
}

/// Renders an invariant at `step`. As a hypothesis its bound variables are
/// fresh constants; as a goal they are existentially quantified.
fn invariant_term(
    ts: &TransitionSystem,
    inv: &Invariant,
    step: usize,
    goal: bool,
    policy: HavocPolicy,
    tag: &str,
) -> Result<(String, String), OracleError> {
    let inv = inv.eliminate();
    // Bound variables become extra state variables of a widened system.
    let mut wide = ts.clone();
    for (v, ty) in &inv.bound {
        wide.vars.push((v.clone(), ty.clone()));
    }
    let (decls, term) = wide.state_formula(&inv.body, step, policy, tag)?;
    let mut out = decls;
    if inv.bound.is_empty() {
        return Ok((out, term));
    }
    if goal {
        let binders: Vec<String> = inv
            .bound
            .iter()
            .map(|(v, ty)| format!("({} {})", TransitionSystem::var(v, step), super::smt::sort(ty)))
            .collect();
        Ok((out, format!("(exists ({}) {term})", binders.join(" "))))
    } else {
        for (v, ty) in &inv.bound {
            let _ = writeln!(out, "(declare-const {} {})", TransitionSystem::var(v, step), super::smt::sort(ty));
        }
        Ok((out, term))
    }
}

/// Checks `w` against `p`: one query for initiation and consecution over
/// all cutpoints, and one for safety.
pub fn validate_witness(p: &Program, w: &Witness, solver: &SolverConfig, policy: HavocPolicy) -> Result<WitnessCheck, String> {
    let go = || -> Result<WitnessCheck, OracleError> {
        let ts = encode(p, policy)?;
        let mut hyp_decls = String::new();
        let mut hyp = BTreeMap::new();
        let mut goals = Vec::new();
        let mut goal_decls = String::new();
        for (h, inv) in &w.invariants {
            let (d, t) = invariant_term(&ts, inv, 0, false, policy, &format!("h{}", h.0))?;
            hyp_decls.push_str(&d);
            hyp.insert(Location::Head(*h), t);
            let (d, t) = invariant_term(&ts, inv, 1, true, policy, &format!("g{}", h.0))?;
            goal_decls.push_str(&d);
            goals.push(format!("(and {} (not {t}))", ts.at(1, Location::Head(*h))));
        }
        let check = |s: &mut Session| -> Result<Option<bool>, OracleError> {
            Ok(match s.check()? {
                SatResult::Unsat => Some(true),
                SatResult::Sat => Some(false),
                SatResult::Unknown(_) => None,
            })
        };
        let mut s = Session::start(solver)?;
        s.send(&ts.declare_step(0))?;
        s.send(&ts.declare_step(1))?;
        s.send(&hyp_decls)?;
        s.send(&goal_decls)?;
        s.send(&format!("(assert {})", premise(&ts, 0, &hyp)))?;
        s.push()?;
        s.send(&format!("(assert {})", ts.trans(0)))?;
        s.send(&format!("(assert {})", disj(&goals)))?;
        let inductive = check(&mut s)?;
        s.pop()?;
        s.send(&format!("(assert {})", ts.error(0)))?;
        let safe = check(&mut s)?;
        Ok(WitnessCheck { inductive, safe })
    };
    go().map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::load;
    use crate::oracle::smt::solver_available;

    fn verdict(src: &str) -> Verdict {
        let p = load(src).unwrap().program;
        is_correct(&p, &OracleConfig::default())
    }

    #[test]
    fn simple_loop_is_safe() {
        if !solver_available(&SolverConfig::default()) {
            return;
        }
        let v = verdict(
            "Int N = nondet; Int i; Int s; assume(N > 0); while (i < N) { i = i + 1; s = s + 2; } assert(s == 2 * N);",
        );
        assert!(matches!(v, Verdict::Safe(_)), "{v:?}");
    }

    #[test]
    fn wrong_assertion_is_unsafe() {
        if !solver_available(&SolverConfig::default()) {
            return;
        }
        let v = verdict("Int N = nondet; Int i; while (i < N) { i = i + 1; } assert(i != 20);");
        assert!(matches!(v, Verdict::Unsafe(_)), "{v:?}");
    }

    #[test]
    fn unsquared_triangular_is_not_proved() {
        if !solver_available(&SolverConfig::default()) {
            return;
        }
        let v = verdict(
            "Int N = nondet; Int i; Int s; Int NN; i = 0; s = 0; assume(N > 0);\n\
             while (i < N) { i = i + 1; s = s + i; } NN = N * N; assert(s == (NN + N) / 2);",
        );
        assert!(matches!(v, Verdict::Unknown(_)), "{v:?}");
    }
}
