//! Concrete sampling and candidate loop invariants guessed from the samples.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::interp::{eval_bool, run_traced, ArrayValue, Counterexample, ExecutionResult, State, Value};
use crate::lang::{BinOp, ControlPoint, Expr, Program, StmtKind, Type};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleConfig {
    pub runs: usize,
    pub seed: u64,
    /// Loop iterations per run.
    pub fuel: u64,
    /// States kept per loop head.
    pub max_states: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            runs: 150,
            seed: 7,
            fuel: 400,
            max_states: 400,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Samples {
    pub at_heads: BTreeMap<ControlPoint, Vec<State>>,
    pub failure: Option<Counterexample>,
}

fn random_value(ty: &Type, rng: &mut StdRng, round: usize) -> Value {
    match ty {
        Type::Int => {
            // Early runs use small values, which make loops short.
            let (lo, hi) = match round % 3 {
                0 => (0, 4),
                1 => (-3, 8),
                _ => (-2, 14),
            };
            Value::int(rng.gen_range(lo..=hi))
        }
        Type::Bool => Value::Bool(rng.gen_bool(0.5)),
        Type::Array(e) => {
            let default = random_value(e, rng, round);
            let n = rng.gen_range(0..=6);
            let cells: Vec<(BigInt, Value)> = (0..n)
                .map(|_| (BigInt::from(rng.gen_range(-1..12)), random_value(e, rng, round + 1)))
                .collect();
            Value::Array(ArrayValue::from_parts(default, cells))
        }
    }
}

/// Runs `p` on a fixed set of small inputs followed by random ones,
/// collecting states at loop heads and stopping at the first failure.
pub fn sample(p: &Program, cfg: &SampleConfig) -> Samples {
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let heads: BTreeSet<ControlPoint> = p.loop_heads().into_iter().collect();
    let base = crate::interp::default_state(p);
    let inputs: Vec<(String, Type)> = p.inputs().map(|d| (d.name.clone(), d.ty.clone())).collect();
    let mut out = Samples::default();
    let mut seen: BTreeSet<State> = BTreeSet::new();
    for round in 0..cfg.runs {
        let mut s = base.clone();
        for (v, ty) in &inputs {
            let val = if round < 6 && *ty == Type::Int {
                Value::int(round as i64)
            } else {
                random_value(ty, &mut rng, round)
            };
            s.set(v, val);
        }
        if !seen.insert(s.clone()) {
            continue;
        }
        let (res, steps) = run_traced(p, &s, cfg.fuel);
        if let ExecutionResult::Failed(c) = res {
            out.failure = Some(c);
            return out;
        }
        for st in steps {
            if heads.contains(&st.label) {
                let v = out.at_heads.entry(st.label).or_default();
                if v.len() < cfg.max_states && !v.contains(&st.state) {
                    v.push(st.state);
                }
            }
        }
    }
    out
}

fn holds_on(e: &Expr, states: &[State]) -> bool {
    states.iter().all(|s| eval_bool(e, s) == Ok(true))
}

fn ratio(i: &BigInt) -> BigRational {
    BigRational::from_integer(i.clone())
}

/// Basis of the affine relations `c . x + c0 = 0` satisfied by all rows.
fn affine_relations(rows: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let Some(first) = rows.first() else { return vec![] };
    let n = first.len() + 1;
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| {
            let mut v: Vec<BigRational> = r.iter().map(ratio).collect();
            v.push(BigRational::one());
            v
        })
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(pr) = (row..m.len()).find(|&r| !m[r][col].is_zero()) else { continue };
        m.swap(row, pr);
        let inv = m[row][col].recip();
        for x in m[row].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..m.len() {
            if r != row && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in 0..n {
                    let d = &m[row][c] * &f;
                    m[r][c] = &m[r][c] - d;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == m.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let mut out = Vec::new();
    for &f in &free {
        let mut v = vec![BigRational::zero(); n];
        v[f] = BigRational::one();
        for (r, &p) in pivots.iter().enumerate() {
            v[p] = -m[r][f].clone();
        }
        let lcm = v
            .iter()
            .fold(BigInt::one(), |acc, x| num_integer::Integer::lcm(&acc, x.denom()));
        let ints: Vec<BigInt> = v.iter().map(|x| (x * ratio(&lcm)).to_integer()).collect();
        out.push(ints);
    }
    out
}

fn scaled(c: &BigInt, v: &str) -> Expr {
    if c.is_one() {
        Expr::var(v)
    } else {
        Expr::mul(Expr::Int(c.clone()), Expr::var(v))
    }
}

fn sum(terms: Vec<Expr>) -> Expr {
    terms
        .into_iter()
        .reduce(Expr::add)
        .unwrap_or_else(|| Expr::int(0))
}

/// `sum c_i v_i + c0 == 0` with the negative terms moved to the right.
fn relation_expr(vars: &[String], coeffs: &[BigInt]) -> Option<Expr> {
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for (v, c) in vars.iter().zip(coeffs) {
        if c.is_positive() {
            lhs.push(scaled(c, v));
        } else if c.is_negative() {
            rhs.push(scaled(&-c, v));
        }
    }
    if lhs.is_empty() && rhs.is_empty() {
        return None;
    }
    let c0 = coeffs.last().expect("constant column");
    if c0.is_positive() {
        lhs.push(Expr::Int(c0.clone()));
    } else if c0.is_negative() {
        rhs.push(Expr::Int(-c0));
    }
    if lhs.is_empty() {
        std::mem::swap(&mut lhs, &mut rhs);
    }
    Some(Expr::eq(sum(lhs), sum(rhs)))
}

fn program_atoms(p: &Program) -> Vec<Expr> {
    let mut atoms = Vec::new();
    p.body.walk(&mut |s| {
        let e = match &s.kind {
            StmtKind::Assert(c) | StmtKind::Assume(c) => c,
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => cond,
            _ => return,
        };
        for c in e.conjuncts() {
            if matches!(c, Expr::Binary(op, _, _) if op.is_order() || matches!(op, BinOp::Eq | BinOp::Ne))
                && !c.is_special()
                && !atoms.contains(&c)
            {
                atoms.push(c);
            }
        }
    });
    atoms
}

/// Integer literals of the program, in order of occurrence.
fn program_constants(p: &Program) -> Vec<BigInt> {
    fn scan(e: &Expr, out: &mut Vec<BigInt>) {
        if let Expr::Int(c) = e {
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
        for c in e.children() {
            scan(c, out);
        }
    }
    let mut out = Vec::new();
    p.body.walk(&mut |s| {
        for e in s.exprs() {
            scan(e, &mut out);
        }
    });
    out
}

fn push_unique(out: &mut Vec<Expr>, e: Expr) {
    if !out.contains(&e) {
        out.push(e);
    }
}

/// Candidate invariants per loop head, each true on every sampled state.
pub fn generate(p: &Program, samples: &Samples) -> BTreeMap<ControlPoint, Vec<Expr>> {
    let atoms = program_atoms(p);
    let mut out = BTreeMap::new();
    for head in p.loop_heads() {
        let states = samples.at_heads.get(&head).cloned().unwrap_or_default();
        out.insert(head, candidates_for(p, &states, &atoms));
    }
    out
}

fn candidates_for(p: &Program, states: &[State], atoms: &[Expr]) -> Vec<Expr> {
    let mut out = Vec::new();
    if states.is_empty() {
        return out;
    }
    let ints: Vec<String> = p
        .decls
        .iter()
        .filter(|d| d.ty == Type::Int)
        .map(|d| d.name.clone())
        .filter(|v| states.iter().all(|s| matches!(s.get(v), Some(Value::Int(_)))))
        .collect();
    // Variables that may also hold an infinite sentinel take part in order
    // facts only.
    let ordered: Vec<String> = p
        .decls
        .iter()
        .filter(|d| d.ty == Type::Int)
        .map(|d| d.name.clone())
        .filter(|v| states.iter().all(|s| s.get(v).is_some_and(Value::is_intlike)))
        .collect();
    let mut thresholds: Vec<BigInt> = (-1..=1).map(BigInt::from).collect();
    for c in program_constants(p) {
        if !thresholds.contains(&c) && thresholds.len() < 8 {
            thresholds.push(c);
        }
    }
    let bools: Vec<String> = p.decls.iter().filter(|d| d.ty == Type::Bool).map(|d| d.name.clone()).collect();
    let arrays: Vec<String> = p
        .decls
        .iter()
        .filter(|d| matches!(d.ty, Type::Array(_)))
        .map(|d| d.name.clone())
        .collect();

    let rows: Vec<Vec<BigInt>> = states
        .iter()
        .map(|s| ints.iter().map(|v| s.get(v).and_then(Value::as_int).cloned().unwrap_or_default()).collect())
        .collect();
    for rel in affine_relations(&rows) {
        if let Some(e) = relation_expr(&ints, &rel) {
            push_unique(&mut out, e);
        }
    }

    let mut sometimes_eq: Vec<Expr> = Vec::new();
    let mut weak: Vec<Expr> = Vec::new();
    for v in &ordered {
        for c in &thresholds {
            for op in [BinOp::Ge, BinOp::Le] {
                let e = Expr::bin(op, Expr::var(v), Expr::Int(c.clone()));
                if holds_on(&e, states) {
                    push_unique(&mut out, e);
                } else if !ints.contains(v) {
                    weak.push(e);
                }
            }
        }
    }
    for (k, v) in ints.iter().enumerate() {
        for w in &ints[k + 1..] {
            let eq = Expr::eq(Expr::var(v), Expr::var(w));
            if holds_on(&eq, states) {
                continue;
            }
            if states.iter().any(|s| eval_bool(&eq, s) == Ok(true)) {
                sometimes_eq.push(eq);
            }
            for c in -1..=1 {
                let diff = |op| {
                    let rhs = match c {
                        0 => Expr::var(w),
                        c if c > 0 => Expr::add(Expr::var(w), Expr::int(c)),
                        c => Expr::sub(Expr::var(w), Expr::int(-c)),
                    };
                    Expr::bin(op, Expr::var(v), rhs)
                };
                for op in [BinOp::Le, BinOp::Ge] {
                    let e = diff(op);
                    if holds_on(&e, states) {
                        push_unique(&mut out, e);
                    } else {
                        weak.push(e);
                    }
                }
            }
        }
    }
    for b in &bools {
        for e in [Expr::var(b), Expr::not(Expr::var(b))] {
            if holds_on(&e, states) {
                push_unique(&mut out, e);
            } else {
                weak.push(e);
            }
        }
    }
    for (k, a) in arrays.iter().enumerate() {
        for b in &arrays[k + 1..] {
            let e = Expr::eq(Expr::var(a), Expr::var(b));
            if holds_on(&e, states) {
                push_unique(&mut out, e);
            } else {
                weak.push(e);
            }
        }
    }
    for a in atoms {
        let known = a.free_vars().iter().all(|v| p.decl(v).is_some());
        if known && holds_on(a, states) {
            push_unique(&mut out, a.clone());
        }
    }
    // Facts that hold whenever a tracked interval is non-empty, say.
    for g in sometimes_eq.iter().take(12) {
        for e in &weak {
            let c = Expr::or(g.clone(), e.clone());
            if holds_on(&c, states) {
                push_unique(&mut out, c);
            }
        }
    }
    out
}
