//! Checking the correctness conditions of an instrumentation operator.
//!
//! Conditions (per rule unless noted):
//! - `1`: the invariant holds for the initial ghost values (per operator);
//! - `2a`: the replacement terminates (it is loop-free);
//! - `2b`: it assigns only the rewritten variable and ghosts;
//! - `2c`: it preserves the invariant, inserted assertions read as assumptions;
//! - `2d`: it leaves the rewritten variable with the value the original
//!   assignment would have produced.
//!
//! 2c and 2d are checked by enumerating all states of a bounded domain, and
//! additionally by an SMT validity query for straight-line rules over
//! integers.

use std::collections::BTreeMap;

use serde::Serialize;

use super::operator::{InstrumentationOperator, MetaKind, RewriteRule};
use crate::interp::{eval, eval_bool, run, ArrayDomain, ExecutionResult, State, Value};
use crate::lang::{Expr, Program, Stmt, StmtKind, Type};
use crate::oracle::smt::SolverConfig;

/// Bounded domains for the enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifyConfig {
    /// Values of integer ghosts and integer program variables.
    pub ints: (i64, i64),
    /// Values substituted for literal meta-variables.
    pub literals: (i64, i64),
    /// Values of array ghosts.
    pub ghost_arrays: ArrayDomain,
    /// Values of array program variables, besides copies of the ghost arrays.
    pub arrays: ArrayDomain,
    /// Solver for the straight-line SMT check; skipped when `None`.
    pub solver: Option<SolverConfig>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            ints: (-2, 2),
            literals: (-2, 3),
            ghost_arrays: ArrayDomain {
                defaults: vec![Value::int(0)],
                indices: (-1, 2),
                elems: (-1..=2).map(Value::int).collect(),
                max_overrides: 1,
            },
            arrays: ArrayDomain {
                defaults: vec![Value::int(0), Value::int(1)],
                indices: (0, 0),
                elems: vec![Value::int(1)],
                max_overrides: 1,
            },
            solver: Some(SolverConfig::default()),
        }
    }
}

impl CertifyConfig {
    pub fn describe(&self) -> String {
        format!(
            "ints [{}, {}], literals [{}, {}], ghost arrays: indices [{}, {}], elems [{}..], <= {} overrides; \
             array variables: <= {} overrides or equal to a ghost array",
            self.ints.0,
            self.ints.1,
            self.literals.0,
            self.literals.1,
            self.ghost_arrays.indices.0,
            self.ghost_arrays.indices.1,
            self.ghost_arrays.elems.len(),
            self.ghost_arrays.max_overrides,
            self.arrays.max_overrides,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionEntry {
    /// `None` for the per-operator condition 1.
    pub rule: Option<String>,
    pub condition: String,
    pub passed: bool,
    pub method: String,
    /// A state violating the condition, taken before the replacement runs.
    #[serde(serialize_with = "state_json")]
    pub witness: Option<State>,
    pub detail: String,
}

fn state_json<S: serde::Serializer>(s: &Option<State>, ser: S) -> Result<S::Ok, S::Error> {
    match s {
        None => ser.serialize_none(),
        Some(st) => {
            let m: serde_json::Map<String, serde_json::Value> =
                st.0.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
            serde::Serialize::serialize(&m, ser)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub operator: String,
    pub domain: String,
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    pub fn find(&self, rule: Option<&str>, condition: &str) -> Vec<&ConditionEntry> {
        self.entries
            .iter()
            .filter(|e| e.condition == condition && (rule.is_none() || e.rule.as_deref() == rule))
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable report")
    }
}

pub(crate) fn entry(rule: Option<&str>, condition: &str, passed: bool, method: &str, detail: String) -> ConditionEntry {
    ConditionEntry {
        rule: rule.map(str::to_string),
        condition: condition.to_string(),
        passed,
        method: method.to_string(),
        witness: None,
        detail,
    }
}

pub fn certify_operator(op: &InstrumentationOperator, cfg: &CertifyConfig) -> ConditionReport {
    let mut entries = Vec::new();
    let init = op.initial_ghost_state();
    let holds = eval_bool(&op.invariant, &init);
    entries.push(ConditionEntry {
        witness: (holds != Ok(true)).then(|| init.clone()),
        ..entry(
            None,
            "1",
            holds == Ok(true),
            "evaluate",
            match &holds {
                Ok(b) => format!("invariant evaluates to {b} on the initial ghost values"),
                Err(e) => format!("evaluation failed: {e}"),
            },
        )
    });

    let ghosts = ghost_states(op, cfg);
    for rule in &op.rules {
        let id = op.rule_ref(rule);
        let loop_free = !rule.replacement.iter().any(Stmt::has_loop);
        entries.push(entry(
            Some(&id),
            "2a",
            loop_free,
            "syntactic",
            if loop_free {
                "replacement is loop-free".into()
            } else {
                "replacement contains a loop".into()
            },
        ));
        let stray: Vec<String> = rule
            .assigned()
            .into_iter()
            .filter(|v| *v != rule.target && !op.is_ghost(v))
            .collect();
        entries.push(entry(
            Some(&id),
            "2b",
            stray.is_empty(),
            "syntactic",
            if stray.is_empty() {
                "assigns only the target and ghosts".into()
            } else {
                format!("also assigns {}", stray.join(", "))
            },
        ));
        let (c, d) = enumerate_rule(op, rule, &ghosts, cfg);
        entries.push(c.into_entry(&id, "2c"));
        entries.push(d.into_entry(&id, "2d"));
        if let Some(solver) = &cfg.solver {
            if let Some((c, d)) = crate::oracle::smt_certify::check_rule(op, rule, &var_shapes(rule), solver) {
                entries.push(ConditionEntry {
                    rule: Some(id.clone()),
                    ..c
                });
                entries.push(ConditionEntry {
                    rule: Some(id.clone()),
                    ..d
                });
            }
        }
    }
    ConditionReport {
        operator: op.name.clone(),
        domain: cfg.describe(),
        entries,
    }
}

struct Tally {
    checked: u64,
    vacuous: u64,
    failure: Option<(State, String)>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            checked: 0,
            vacuous: 0,
            failure: None,
        }
    }

    fn into_entry(self, rule: &str, condition: &str) -> ConditionEntry {
        let passed = self.failure.is_none();
        let detail = match &self.failure {
            None => format!(
                "{} states checked ({} blocked by inserted assertions)",
                self.checked, self.vacuous
            ),
            Some((_, why)) => why.clone(),
        };
        ConditionEntry {
            witness: self.failure.map(|(s, _)| s),
            ..entry(Some(rule), condition, passed, "enumeration", detail)
        }
    }
}

fn cartesian(domains: &[(String, Vec<Value>)], mut f: impl FnMut(&State) -> bool) {
    fn go(
        domains: &[(String, Vec<Value>)],
        k: usize,
        st: &mut State,
        f: &mut dyn FnMut(&State) -> bool,
    ) -> bool {
        if k == domains.len() {
            return f(st);
        }
        for v in &domains[k].1 {
            st.set(&domains[k].0, v.clone());
            if !go(domains, k + 1, st, f) {
                return false;
            }
        }
        true
    }
    go(domains, 0, &mut State::new(), &mut f);
}

fn int_values(r: (i64, i64)) -> Vec<Value> {
    (r.0..=r.1).map(Value::int).collect()
}

fn values_of(ty: &Type, cfg: &CertifyConfig, arrays: &ArrayDomain) -> Vec<Value> {
    match ty {
        Type::Int => int_values(cfg.ints),
        Type::Bool => vec![Value::Bool(false), Value::Bool(true)],
        Type::Array(_) => arrays.values(),
    }
}

/// All ghost states of the bounded domain satisfying the invariant.
fn ghost_states(op: &InstrumentationOperator, cfg: &CertifyConfig) -> Vec<State> {
    let domains: Vec<(String, Vec<Value>)> = op
        .ghosts
        .iter()
        .map(|g| (g.name.clone(), values_of(&g.ty, cfg, &cfg.ghost_arrays)))
        .collect();
    let mut out = Vec::new();
    cartesian(&domains, |s| {
        if eval_bool(&op.invariant, s) == Ok(true) {
            out.push(s.clone());
        }
        true
    });
    out
}

/// Set partitions of `0..n` as restricted growth strings.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(k: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == n {
            out.push(cur.clone());
            return;
        }
        let max = cur.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=max {
            cur.push(b);
            go(k + 1, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), &mut out);
    out
}

/// One way of instantiating a rule's meta-variables: which of them denote
/// the same program variable, and the values of literal meta-variables.
struct Shape {
    binding: BTreeMap<String, Expr>,
    vars: Vec<(String, Type)>,
    literals: Vec<(String, Value)>,
}

/// Bindings of the variable meta-variables, one per way of aliasing
/// same-typed ones, with the program variables each binding uses.
pub fn var_shapes(rule: &RewriteRule) -> Vec<(BTreeMap<String, Expr>, Vec<(String, Type)>)> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (m, k) in &rule.metas {
        if *k != MetaKind::IntLit {
            groups.entry(k.ty().to_string()).or_default().push(m.clone());
        }
    }
    let mut shapes = vec![(BTreeMap::new(), Vec::new())];
    for metas in groups.values() {
        let ty = rule.meta_kind(&metas[0]).expect("declared").ty();
        let mut next = Vec::new();
        for part in partitions(metas.len()) {
            for (binding, vars) in &shapes {
                let mut binding: BTreeMap<String, Expr> = binding.clone();
                let mut vars: Vec<(String, Type)> = vars.clone();
                let mut names: BTreeMap<usize, String> = BTreeMap::new();
                for (m, b) in metas.iter().zip(&part) {
                    let name = names
                        .entry(*b)
                        .or_insert_with(|| {
                            let n = m.trim_start_matches('?').to_string();
                            vars.push((n.clone(), ty.clone()));
                            n
                        })
                        .clone();
                    binding.insert(m.clone(), Expr::Var(name));
                }
                next.push((binding, vars));
            }
        }
        shapes = next;
    }
    shapes
}

fn shapes(rule: &RewriteRule, cfg: &CertifyConfig) -> Vec<Shape> {
    let lits: Vec<String> = rule
        .metas
        .iter()
        .filter(|(_, k)| *k == MetaKind::IntLit)
        .map(|(m, _)| m.clone())
        .collect();
    let shapes = var_shapes(rule);
    let mut out = Vec::new();
    for (binding, vars) in shapes {
        let mut combos: Vec<Vec<(String, Value)>> = vec![vec![]];
        for l in &lits {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    int_values(cfg.literals).into_iter().map(move |v| {
                        let mut c = c.clone();
                        c.push((l.clone(), v));
                        c
                    })
                })
                .collect();
        }
        for literals in combos {
            let mut binding = binding.clone();
            for (m, v) in &literals {
                binding.insert(m.clone(), crate::instrument::operator::value_to_expr(v));
            }
            out.push(Shape {
                binding,
                vars: vars.clone(),
                literals: literals
                    .iter()
                    .map(|(m, v)| (m.trim_start_matches('?').to_string(), v.clone()))
                    .collect(),
            });
        }
    }
    out
}

/// Replaces every `assert` by `assume`.
pub fn asserts_as_assumes(s: &Stmt) -> Stmt {
    let mut s = s.clone();
    s.walk_mut(&mut |x| {
        if let StmtKind::Assert(c) = &x.kind {
            x.kind = StmtKind::Assume(c.clone());
        }
    });
    s
}

fn enumerate_rule(
    op: &InstrumentationOperator,
    rule: &RewriteRule,
    ghosts: &[State],
    cfg: &CertifyConfig,
) -> (Tally, Tally) {
    let mut c = Tally::new();
    let mut d = Tally::new();
    for shape in shapes(rule, cfg) {
        let body: Vec<Stmt> = rule.instantiate(&shape.binding).iter().map(asserts_as_assumes).collect();
        let prog = Program::new(vec![], Stmt::block(body));
        let (target, pattern) = rule.instantiate_pattern(&shape.binding);
        let read = pattern.free_vars();
        for g in ghosts {
            let mut domains: Vec<(String, Vec<Value>)> = Vec::new();
            for (v, ty) in &shape.vars {
                if *v == target && !read.contains(v) {
                    // Overwritten before it is read, so one value suffices.
                    domains.push((v.clone(), vec![Value::default_of(ty)]));
                    continue;
                }
                let mut vals = values_of(ty, cfg, &cfg.arrays);
                if let Type::Array(_) = ty {
                    for gv in &op.ghosts {
                        if gv.ty == *ty {
                            let x = g.get(&gv.name).expect("ghost bound").clone();
                            if !vals.contains(&x) {
                                vals.push(x);
                            }
                        }
                    }
                }
                domains.push((v.clone(), vals));
            }
            cartesian(&domains, |vars| {
                let mut s = g.clone();
                for (k, v) in &vars.0 {
                    s.set(k, v.clone());
                }
                let witness = || {
                    let mut w = s.clone();
                    for (m, v) in &shape.literals {
                        w.set(m, v.clone());
                    }
                    w
                };
                let z = eval(&pattern, &s);
                match run(&prog, &s, 0) {
                    ExecutionResult::Terminated(after) => {
                        c.checked += 1;
                        d.checked += 1;
                        if c.failure.is_none() && eval_bool(&op.invariant, &after) != Ok(true) {
                            c.failure = Some((witness(), format!("invariant violated afterwards: {after}")));
                        }
                        if d.failure.is_none() {
                            let got = after.get(&target);
                            match &z {
                                Ok(z) if got == Some(z) => {}
                                Ok(z) => {
                                    d.failure = Some((
                                        witness(),
                                        format!(
                                            "{target} is {} afterwards, the original assignment gives {z}",
                                            got.map_or("unset".to_string(), |v| v.to_string())
                                        ),
                                    ))
                                }
                                Err(e) => d.failure = Some((witness(), format!("pattern evaluation failed: {e}"))),
                            }
                        }
                    }
                    ExecutionResult::Blocked => {
                        c.vacuous += 1;
                        d.vacuous += 1;
                    }
                    other => {
                        let why = format!("replacement did not terminate normally: {other:?}");
                        if c.failure.is_none() {
                            c.failure = Some((witness(), why.clone()));
                        }
                        if d.failure.is_none() {
                            d.failure = Some((witness(), why));
                        }
                    }
                }
                c.failure.is_none() || d.failure.is_none()
            });
            if c.failure.is_some() && d.failure.is_some() {
                return (c, d);
            }
        }
    }
    (c, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_counts_are_bell_numbers() {
        assert_eq!(partitions(1).len(), 1);
        assert_eq!(partitions(2).len(), 2);
        assert_eq!(partitions(3).len(), 5);
        assert_eq!(partitions(4).len(), 15);
    }

    #[test]
    fn empty_operator_passes_vacuously() {
        let op = InstrumentationOperator {
            name: "empty".into(),
            ghosts: vec![],
            rules: vec![],
            invariant: Expr::Bool(true),
        };
        let cfg = CertifyConfig {
            solver: None,
            ..CertifyConfig::default()
        };
        let r = certify_operator(&op, &cfg);
        assert!(r.passed());
        assert_eq!(r.entries.len(), 1);
    }
}
