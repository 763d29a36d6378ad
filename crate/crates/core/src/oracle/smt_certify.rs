//! Unbounded checks of preservation (2c) and semantics (2d) for loop-free
//! rules, with literal meta-variables left symbolic.

use std::collections::BTreeMap;

use super::encode::{encode, read_state, HavocPolicy, Location, TransitionSystem};
use super::smt::{SatResult, Session, SolverConfig, SolverError};
use crate::instrument::certify::{asserts_as_assumes, entry};
use crate::instrument::{ConditionEntry, InstrumentationOperator, MetaKind, RewriteRule};
use crate::interp::State;
use crate::lang::{Decl, Expr, Program, Stmt, Type};

enum Outcome {
    Valid,
    Refuted(State),
}

/// `None` when the rule has loops, when some construct would have to be
/// approximated (aggregates, infinities), or when the solver gives no answer.
pub fn check_rule(
    op: &InstrumentationOperator,
    rule: &RewriteRule,
    shapes: &[(BTreeMap<String, Expr>, Vec<(String, Type)>)],
    solver: &SolverConfig,
) -> Option<(ConditionEntry, ConditionEntry)> {
    if rule.replacement.iter().any(Stmt::has_loop) {
        return None;
    }
    let id = op.rule_ref(rule);
    let mut c = None;
    let mut d = None;
    for (binding, vars) in shapes {
        let (rc, rd) = check_shape(op, rule, binding, vars, solver).ok()??;
        if c.is_none() {
            if let Outcome::Refuted(s) = rc {
                c = Some(s);
            }
        }
        if d.is_none() {
            if let Outcome::Refuted(s) = rd {
                d = Some(s);
            }
        }
    }
    let make = |cond: &str, w: Option<State>| {
        let detail = match &w {
            None => format!("valid for all {} aliasing shapes", shapes.len()),
            Some(_) => "the solver found a violating state".to_string(),
        };
        ConditionEntry {
            witness: w.clone(),
            ..entry(Some(&id), cond, w.is_none(), "smt", detail)
        }
    };
    Some((make("2c", c), make("2d", d)))
}

fn check_shape(
    op: &InstrumentationOperator,
    rule: &RewriteRule,
    binding: &BTreeMap<String, Expr>,
    vars: &[(String, Type)],
    solver: &SolverConfig,
) -> Result<Option<(Outcome, Outcome)>, SolverError> {
    let mut binding = binding.clone();
    let mut decls: Vec<Decl> = Vec::new();
    let mut push = |name: &str, ty: &Type| {
        if !decls.iter().any(|d| d.name == name) {
            decls.push(Decl {
                name: name.to_string(),
                ty: ty.clone(),
                input: true,
            });
        }
    };
    for (v, ty) in vars {
        push(v, ty);
    }
    for (m, k) in &rule.metas {
        if *k == MetaKind::IntLit {
            let name = format!("lit_{}", m.trim_start_matches('?'));
            push(&name, &Type::Int);
            binding.insert(m.clone(), Expr::Var(name));
        }
    }
    for g in &op.ghosts {
        push(&g.name, &g.ty);
    }
    let body: Vec<Stmt> = rule.instantiate(&binding).iter().map(asserts_as_assumes).collect();
    let prog = Program::new(decls, Stmt::block(body));
    let (target, pattern) = rule.instantiate_pattern(&binding);
    let policy = HavocPolicy::exact();
    let Ok(ts) = encode(&prog, policy) else { return Ok(None) };
    if ts.havocked {
        return Ok(None);
    }
    let Ok((d_inv0, inv0)) = ts.state_formula(&op.invariant, 0, policy, "i0") else { return Ok(None) };
    let Ok((d_inv1, inv1)) = ts.state_formula(&op.invariant, 1, policy, "i1") else { return Ok(None) };
    let Ok((d_pat, pat)) = ts.state_formula(&pattern, 0, policy, "p0") else { return Ok(None) };
    if !(d_inv0.is_empty() && d_inv1.is_empty() && d_pat.is_empty()) {
        return Ok(None);
    }
    let mut s = Session::start(solver)?;
    s.send(&ts.declare_step(0))?;
    s.send(&ts.declare_step(1))?;
    s.send(&format!("(assert {})", ts.at(0, Location::Entry)))?;
    s.send(&format!("(assert {inv0})"))?;
    s.send(&format!("(assert {})", ts.trans(0)))?;
    let query = |s: &mut Session, goal: String| -> Result<Option<Outcome>, SolverError> {
        s.push()?;
        s.send(&format!("(assert (not {goal}))"))?;
        let r = match s.check()? {
            SatResult::Unsat => Some(Outcome::Valid),
            SatResult::Sat => Some(Outcome::Refuted(read_state(s, &ts.vars, 0)?)),
            SatResult::Unknown(_) => None,
        };
        s.pop()?;
        Ok(r)
    };
    let c = query(&mut s, inv1)?;
    let d = query(&mut s, format!("(= {} {pat})", TransitionSystem::var(&target, 1)))?;
    Ok(c.zip(d))
}
