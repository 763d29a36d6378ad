//! Transition systems over cutpoints (program entry and loop heads), with
//! the loop-free code between cutpoints summarised by one formula.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::smt::{int_term, sexp_value, sort, value_term, Session, Sexp, SolverError};
use crate::interp::{State, Value};
use crate::lang::{HomId, 
    type_of, BinOp, ControlPoint, Env, Expr, Program, Quant, Stmt, StmtKind, Type, UnOp,
};

/// Which constructs are replaced by fresh unconstrained symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HavocPolicy {
    /// Products of two non-literals, and division or remainder by a non-literal.
    pub nonlinear: bool,
    /// `forall` and `exists` over arrays.
    pub quantifiers: bool,
}

impl Default for HavocPolicy {
    fn default() -> Self {
        HavocPolicy {
            nonlinear: true,
            quantifiers: true,
        }
    }
}

impl HavocPolicy {
    /// Nonlinear arithmetic and quantifiers passed to the solver as they are.
    /// Aggregates and infinities are havocked under every policy.
    pub fn exact() -> Self {
        HavocPolicy {
            nonlinear: false,
            quantifiers: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    /// A state variable at the start of the fragment.
    In(String),
    /// A fragment-local symbol.
    Loc(usize),
    Lit(String),
    App(String, Vec<Term>),
    /// `(forall/exists ((name Int)) body)`; `name` is local to the binder.
    Bind(&'static str, String, Box<Term>),
}

impl Term {
    fn app(f: &str, args: Vec<Term>) -> Term {
        Term::App(f.to_string(), args)
    }

    fn is_simple(&self) -> bool {
        matches!(self, Term::In(_) | Term::Loc(_) | Term::Lit(_))
    }

    fn is_true(&self) -> bool {
        matches!(self, Term::Lit(s) if s == "true")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Local {
    pub sort: String,
    /// `None` for havocked values.
    pub def: Option<Term>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    Entry,
    Head(ControlPoint),
    Exit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub target: Location,
    pub guard: Term,
    pub state: BTreeMap<String, Term>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fragment {
    pub locals: Vec<Local>,
    pub edges: Vec<Edge>,
    /// Failing assertions: label and the condition under which it fails.
    pub errors: Vec<(ControlPoint, Term)>,
}

#[derive(Clone, Debug)]
pub struct TransitionSystem {
    pub vars: Vec<(String, Type)>,
    pub inputs: Vec<String>,
    pub locations: Vec<Location>,
    pub fragments: Vec<Fragment>,
    /// Whether some construct was havocked.
    pub havocked: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("cannot type `{0}`")]
    Untyped(String),
}

struct Sym<'a> {
    types: &'a Env,
    policy: HavocPolicy,
    locals: Vec<Local>,
    edges: Vec<Edge>,
    errors: Vec<(ControlPoint, Term)>,
    havocked: bool,
    binders: usize,
}

type SymEnv = BTreeMap<String, Term>;

fn is_literal(e: &Expr) -> bool {
    match e {
        Expr::Int(_) => true,
        Expr::Unary(UnOp::Neg, x) => is_literal(x),
        _ => false,
    }
}

fn literal_is_zero(e: &Expr) -> bool {
    match e {
        Expr::Int(i) => i.sign() == num_bigint::Sign::NoSign,
        Expr::Unary(UnOp::Neg, x) => literal_is_zero(x),
        _ => false,
    }
}

impl Sym<'_> {
    fn local(&mut self, sort: &str, def: Option<Term>) -> Term {
        self.locals.push(Local {
            sort: sort.to_string(),
            def,
        });
        Term::Loc(self.locals.len() - 1)
    }

    fn havoc(&mut self, sort: &str) -> Term {
        self.havocked = true;
        self.local(sort, None)
    }

    fn name(&mut self, sort: &str, t: Term) -> Term {
        if t.is_simple() {
            t
        } else {
            self.local(sort, Some(t))
        }
    }

    fn and(&mut self, g: &Term, c: Term) -> Term {
        if g.is_true() {
            return self.name("Bool", c);
        }
        self.name("Bool", Term::app("and", vec![g.clone(), c]))
    }

    fn expr(&mut self, e: &Expr, env: &SymEnv) -> Result<Term, EncodeError> {
        Ok(match e {
            Expr::Int(i) => Term::Lit(int_term(i)),
            Expr::Bool(b) => Term::Lit(b.to_string()),
            Expr::NegInf | Expr::PosInf => self.havoc("Int"),
            Expr::Var(v) => env
                .get(v)
                .cloned()
                .ok_or_else(|| EncodeError::Untyped(v.clone()))?,
            Expr::Unary(UnOp::Not, x) => Term::app("not", vec![self.expr(x, env)?]),
            Expr::Unary(UnOp::Neg, x) => Term::app("-", vec![self.expr(x, env)?]),
            Expr::Binary(op, l, r) => {
                let nonlinear = match op {
                    BinOp::Mul => !is_literal(l) && !is_literal(r),
                    BinOp::Div | BinOp::Mod => !is_literal(r),
                    _ => false,
                };
                if nonlinear && self.policy.nonlinear {
                    return Ok(self.havoc("Int"));
                }
                let a = self.expr(l, env)?;
                let b = self.expr(r, env)?;
                match op {
                    BinOp::Ne => Term::app("not", vec![Term::app("=", vec![a, b])]),
                    BinOp::Div | BinOp::Mod if literal_is_zero(r) => {
                        if *op == BinOp::Div {
                            Term::Lit("0".into())
                        } else {
                            a
                        }
                    }
                    BinOp::Div | BinOp::Mod if nonlinear => {
                        let f = if *op == BinOp::Div { "div" } else { "mod" };
                        let zero_case = if *op == BinOp::Div {
                            Term::Lit("0".into())
                        } else {
                            a.clone()
                        };
                        Term::app(
                            "ite",
                            vec![
                                Term::app("=", vec![b.clone(), Term::Lit("0".into())]),
                                zero_case,
                                Term::app(f, vec![a, b]),
                            ],
                        )
                    }
                    _ => {
                        let f = match op {
                            BinOp::Eq => "=",
                            BinOp::Lt => "<",
                            BinOp::Le => "<=",
                            BinOp::Gt => ">",
                            BinOp::Ge => ">=",
                            BinOp::And => "and",
                            BinOp::Or => "or",
                            BinOp::Add => "+",
                            BinOp::Sub => "-",
                            BinOp::Mul => "*",
                            BinOp::Div => "div",
                            BinOp::Mod => "mod",
                            BinOp::Ne => unreachable!(),
                        };
                        Term::app(f, vec![a, b])
                    }
                }
            }
            Expr::Select(a, i) => Term::app("select", vec![self.expr(a, env)?, self.expr(i, env)?]),
            Expr::Store(a, i, v) => Term::app(
                "store",
                vec![self.expr(a, env)?, self.expr(i, env)?, self.expr(v, env)?],
            ),
            Expr::ConstArray(v, _) => {
                let ty = type_of(self.types, v).map_err(|_| EncodeError::Untyped(v.to_string()))?;
                Term::App(
                    format!("(as const (Array Int {}))", sort(&ty)),
                    vec![self.expr(v, env)?],
                )
            }
            Expr::Quantified {
                kind,
                array,
                lo,
                hi,
                pred,
            } => {
                if empty_literal_range(lo, hi) {
                    return Ok(Term::Lit((*kind == Quant::Forall).to_string()));
                }
                if self.policy.quantifiers {
                    return Ok(self.havoc("Bool"));
                }
                let a = self.expr(array, env)?;
                let l = self.expr(lo, env)?;
                let u = self.expr(hi, env)?;
                self.binders += 1;
                let q = format!("|q!{}|", self.binders);
                let qt = Term::Lit(q.clone());
                let mut inner = env.clone();
                inner.insert(pred.value_param.clone(), Term::app("select", vec![a, qt.clone()]));
                inner.insert(pred.index_param.clone(), qt.clone());
                let body = self.expr(&pred.body, &inner)?;
                let range = Term::app(
                    "and",
                    vec![Term::app("<=", vec![l, qt.clone()]), Term::app("<", vec![qt, u])],
                );
                match kind {
                    Quant::Forall => Term::Bind("forall", q, Box::new(Term::app("=>", vec![range, body]))),
                    Quant::Exists => Term::Bind("exists", q, Box::new(Term::app("and", vec![range, body]))),
                }
            }
            Expr::Aggregate { hom, lo, hi, .. }
                if matches!(hom, HomId::Sum | HomId::Count(_)) && empty_literal_range(lo, hi) =>
            {
                Term::Lit("0".into())
            }
            Expr::Aggregate { .. } => self.havoc("Int"),
        })
    }

    fn type_sort(&self, v: &str) -> String {
        self.types.get(v).map(sort).unwrap_or_else(|| "Int".into())
    }

    /// Executes `s`; returns the guard and state on normal completion.
    fn stmt(&mut self, s: &Stmt, guard: Term, mut env: SymEnv) -> Result<Option<(Term, SymEnv)>, EncodeError> {
        match &s.kind {
            StmtKind::Skip => Ok(Some((guard, env))),
            StmtKind::Assign { target, value } => {
                let t = self.expr(value, &env)?;
                let sort = self.type_sort(target);
                let t = self.name(&sort, t);
                env.insert(target.clone(), t);
                Ok(Some((guard, env)))
            }
            StmtKind::Assume(c) => {
                let c = self.expr(c, &env)?;
                let g = self.and(&guard, c);
                Ok(Some((g, env)))
            }
            StmtKind::Assert(c) => {
                let c = self.expr(c, &env)?;
                let c = self.name("Bool", c);
                let fail = self.and(&guard, Term::app("not", vec![c.clone()]));
                self.errors.push((s.label, fail));
                let g = self.and(&guard, c);
                Ok(Some((g, env)))
            }
            StmtKind::Block(ss) => self.seq(ss.iter(), guard, env),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let c = self.expr(cond, &env)?;
                let c = self.name("Bool", c);
                let g1 = self.and(&guard, c.clone());
                let g2 = self.and(&guard, Term::app("not", vec![c]));
                let r1 = self.stmt(then_branch, g1, env.clone())?;
                let r2 = self.stmt(else_branch, g2, env)?;
                Ok(match (r1, r2) {
                    (None, None) => None,
                    (Some(r), None) | (None, Some(r)) => Some(r),
                    (Some((g1, e1)), Some((g2, e2))) => {
                        let g = self.name("Bool", Term::app("or", vec![g1.clone(), g2]));
                        let mut env = SymEnv::new();
                        for (v, t1) in e1 {
                            let t2 = &e2[&v];
                            let t = if t1 == *t2 {
                                t1
                            } else {
                                let sort = self.type_sort(&v);
                                self.local(&sort, Some(Term::app("ite", vec![g1.clone(), t1, t2.clone()])))
                            };
                            env.insert(v, t);
                        }
                        Some((g, env))
                    }
                })
            }
            StmtKind::While { .. } => {
                self.edges.push(Edge {
                    target: Location::Head(s.label),
                    guard,
                    state: env,
                });
                Ok(None)
            }
        }
    }

    fn seq<'s>(
        &mut self,
        ss: impl Iterator<Item = &'s Stmt>,
        guard: Term,
        env: SymEnv,
    ) -> Result<Option<(Term, SymEnv)>, EncodeError> {
        let mut cur = (guard, env);
        for s in ss {
            match self.stmt(s, cur.0, cur.1)? {
                Some(next) => cur = next,
                None => return Ok(None),
            }
        }
        Ok(Some(cur))
    }
}

#[derive(Clone)]
struct Cont<'a> {
    stmts: Vec<&'a Stmt>,
    end: Location,
}

fn continuations<'a>(s: &'a Stmt, cont: Cont<'a>, out: &mut BTreeMap<ControlPoint, (&'a Stmt, Cont<'a>)>) {
    match &s.kind {
        StmtKind::Block(ss) => {
            for (k, child) in ss.iter().enumerate() {
                let mut stmts: Vec<&Stmt> = ss[k + 1..].iter().collect();
                stmts.extend(cont.stmts.iter().copied());
                continuations(
                    child,
                    Cont {
                        stmts,
                        end: cont.end,
                    },
                    out,
                );
            }
        }
        StmtKind::If {
            then_branch,
            else_branch,
            ..
        } => {
            continuations(then_branch, cont.clone(), out);
            continuations(else_branch, cont, out);
        }
        StmtKind::While { body, .. } => {
            continuations(
                body,
                Cont {
                    stmts: vec![],
                    end: Location::Head(s.label),
                },
                out,
            );
            out.insert(s.label, (s, cont));
        }
        _ => {}
    }
}

fn input_env(vars: &[(String, Type)]) -> SymEnv {
    vars.iter().map(|(v, _)| (v.clone(), Term::In(v.clone()))).collect()
}

/// Builds the transition system of a normalized program.
pub fn encode(p: &Program, policy: HavocPolicy) -> Result<TransitionSystem, EncodeError> {
    let types: Env = p.decls.iter().map(|d| (d.name.clone(), d.ty.clone())).collect();
    let vars: Vec<(String, Type)> = p.decls.iter().map(|d| (d.name.clone(), d.ty.clone())).collect();
    let mut conts = BTreeMap::new();
    continuations(
        &p.body,
        Cont {
            stmts: vec![],
            end: Location::Exit,
        },
        &mut conts,
    );
    let mut locations = vec![Location::Entry];
    locations.extend(conts.keys().map(|l| Location::Head(*l)));
    locations.push(Location::Exit);
    let mut havocked = false;
    let mut fragments = Vec::new();
    for loc in &locations {
        let mut sym = Sym {
            types: &types,
            policy,
            locals: vec![],
            edges: vec![],
            errors: vec![],
            havocked: false,
            binders: 0,
        };
        let env = input_env(&vars);
        let tru = Term::Lit("true".into());
        match loc {
            Location::Entry => {
                if let Some((g, e)) = sym.stmt(&p.body, tru, env)? {
                    sym.edges.push(Edge {
                        target: Location::Exit,
                        guard: g,
                        state: e,
                    });
                }
            }
            Location::Head(l) => {
                let (w, cont) = &conts[l];
                let StmtKind::While { cond, body } = &w.kind else { unreachable!() };
                let c = sym.expr(cond, &env)?;
                let c = sym.name("Bool", c);
                if let Some((g, e)) = sym.stmt(body, c.clone(), env.clone())? {
                    sym.edges.push(Edge {
                        target: *loc,
                        guard: g,
                        state: e,
                    });
                }
                let g = sym.name("Bool", Term::app("not", vec![c]));
                if let Some((g, e)) = sym.seq(cont.stmts.iter().copied(), g, env)? {
                    sym.edges.push(Edge {
                        target: cont.end,
                        guard: g,
                        state: e,
                    });
                }
            }
            Location::Exit => {}
        }
        havocked |= sym.havocked;
        fragments.push(Fragment {
            locals: sym.locals,
            edges: sym.edges,
            errors: sym.errors,
        });
    }
    Ok(TransitionSystem {
        inputs: p.inputs().map(|d| d.name.clone()).collect(),
        vars,
        locations,
        fragments,
        havocked,
    })
}

/// Printing of transition-system formulas for a particular unrolling step.
impl TransitionSystem {
    pub fn loc_index(&self, l: Location) -> usize {
        self.locations.iter().position(|x| *x == l).expect("known location")
    }

    pub fn heads(&self) -> Vec<ControlPoint> {
        self.locations
            .iter()
            .filter_map(|l| match l {
                Location::Head(p) => Some(*p),
                _ => None,
            })
            .collect()
    }

    pub fn var_type(&self, v: &str) -> Option<&Type> {
        self.vars.iter().find(|(n, _)| n == v).map(|(_, t)| t)
    }

    pub fn var(v: &str, step: usize) -> String {
        format!("|{v}@{step}|")
    }

    pub fn pc(step: usize) -> String {
        format!("|pc@{step}|")
    }

    fn local_name(frag: usize, k: usize, step: usize) -> String {
        format!("|%{frag}.{k}@{step}|")
    }

    pub fn term(&self, t: &Term, frag: usize, step: usize) -> String {
        match t {
            Term::In(v) => Self::var(v, step),
            Term::Loc(k) => Self::local_name(frag, *k, step),
            Term::Lit(s) => s.clone(),
            Term::App(f, args) => {
                let mut s = format!("({f}");
                for a in args {
                    s.push(' ');
                    s.push_str(&self.term(a, frag, step));
                }
                s.push(')');
                s
            }
            Term::Bind(q, v, body) => format!("({q} (({v} Int)) {})", self.term(body, frag, step)),
        }
    }

    /// Declarations and definitions of the state and locals at `step`.
    pub fn declare_step(&self, step: usize) -> String {
        let mut out = String::new();
        for (v, ty) in &self.vars {
            let _ = writeln!(out, "(declare-const {} {})", Self::var(v, step), sort(ty));
        }
        let _ = writeln!(out, "(declare-const {} Int)", Self::pc(step));
        let _ = writeln!(
            out,
            "(assert (and (<= 0 {pc}) (< {pc} {})))",
            self.locations.len(),
            pc = Self::pc(step)
        );
        for (f, frag) in self.fragments.iter().enumerate() {
            for (k, l) in frag.locals.iter().enumerate() {
                let _ = writeln!(out, "(declare-const {} {})", Self::local_name(f, k, step), l.sort);
            }
            for (k, l) in frag.locals.iter().enumerate() {
                if let Some(d) = &l.def {
                    let _ = writeln!(
                        out,
                        "(assert (= {} {}))",
                        Self::local_name(f, k, step),
                        self.term(d, f, step)
                    );
                }
            }
        }
        out
    }

    pub fn at(&self, step: usize, l: Location) -> String {
        format!("(= {} {})", Self::pc(step), self.loc_index(l))
    }

    /// Initial states: at entry, non-input variables hold their defaults.
    pub fn init(&self, step: usize) -> String {
        let mut parts = vec![self.at(step, Location::Entry)];
        for (v, ty) in &self.vars {
            if !self.inputs.contains(v) {
                parts.push(format!(
                    "(= {} {})",
                    Self::var(v, step),
                    value_term(&Value::default_of(ty))
                ));
            }
        }
        format!("(and {})", parts.join(" "))
    }

    /// The formula of one edge from `step` to `step + 1`.
    pub fn edge(&self, frag: usize, e: &Edge, step: usize) -> String {
        let mut parts = vec![self.term(&e.guard, frag, step), self.at(step + 1, e.target)];
        for (v, t) in &e.state {
            parts.push(format!("(= {} {})", Self::var(v, step + 1), self.term(t, frag, step)));
        }
        format!("(and {})", parts.join(" "))
    }

    /// Transition relation from `step` to `step + 1`.
    pub fn trans(&self, step: usize) -> String {
        let mut parts = Vec::new();
        for (f, frag) in self.fragments.iter().enumerate() {
            let edges: Vec<String> = frag.edges.iter().map(|e| self.edge(f, e, step)).collect();
            let body = match edges.len() {
                0 => "false".to_string(),
                1 => edges[0].clone(),
                _ => format!("(or {})", edges.join(" ")),
            };
            parts.push(format!("(=> {} {body})", self.at(step, self.locations[f])));
        }
        format!("(and {})", parts.join(" "))
    }

    /// Some assertion fails during the step starting at `step`.
    pub fn error(&self, step: usize) -> String {
        let mut parts = Vec::new();
        for (f, frag) in self.fragments.iter().enumerate() {
            for (_, c) in &frag.errors {
                parts.push(format!("(and {} {})", self.at(step, self.locations[f]), self.term(c, f, step)));
            }
        }
        match parts.len() {
            0 => "false".into(),
            _ => format!("(or {})", parts.join(" ")),
        }
    }

    /// Errors reachable from location `l` in the step starting at `step`.
    pub fn error_at(&self, l: Location, step: usize) -> String {
        let f = self.loc_index(l);
        let parts: Vec<String> = self.fragments[f]
            .errors
            .iter()
            .map(|(_, c)| self.term(c, f, step))
            .collect();
        match parts.len() {
            0 => "false".into(),
            _ => format!("(or {})", parts.join(" ")),
        }
    }

    /// A state formula over the variables at `step`. Returns extra
    /// declarations (for havocked sub-terms) and the term.
    pub fn state_formula(&self, e: &Expr, step: usize, policy: HavocPolicy, tag: &str) -> Result<(String, String), EncodeError> {
        let types: Env = self.vars.iter().cloned().collect();
        let mut sym = Sym {
            types: &types,
            policy,
            locals: vec![],
            edges: vec![],
            errors: vec![],
            havocked: false,
            binders: 0,
        };
        let env = input_env(&self.vars);
        let t = sym.expr(e, &env)?;
        let mut decls = String::new();
        let name = |k: usize| format!("|%{tag}.{k}@{step}|");
        let render = |t: &Term| -> String { render_with(self, t, step, &name) };
        for (k, l) in sym.locals.iter().enumerate() {
            let _ = writeln!(decls, "(declare-const {} {})", name(k), l.sort);
            if let Some(d) = &l.def {
                let _ = writeln!(decls, "(assert (= {} {}))", name(k), render(d));
            }
        }
        Ok((decls, render(&t)))
    }
}

/// The values of `vars` at `step` in the session's current model.
pub fn read_state(
    session: &mut Session,
    vars: &[(String, Type)],
    step: usize,
) -> Result<State, SolverError> {
    let terms: Vec<String> = vars.iter().map(|(v, _)| TransitionSystem::var(v, step)).collect();
    let vals = session.values(&terms)?;
    let mut defs: Option<Vec<Sexp>> = None;
    let mut st = State::new();
    for ((v, ty), s) in vars.iter().zip(&vals) {
        let mut val = sexp_value(s, ty, defs.as_deref().unwrap_or(&[]));
        if val.is_none() && defs.is_none() {
            defs = Some(session.model_defs()?);
            val = sexp_value(s, ty, defs.as_deref().unwrap_or(&[]));
        }
        let val = val.ok_or_else(|| SolverError::Malformed(format!("value of {v}: {s}")))?;
        st.set(v, val);
    }
    Ok(st)
}

fn render_with(ts: &TransitionSystem, t: &Term, step: usize, name: &dyn Fn(usize) -> String) -> String {
    match t {
        Term::In(v) => TransitionSystem::var(v, step),
        Term::Loc(k) => name(*k),
        Term::Lit(s) => s.clone(),
        Term::App(f, args) => {
            let mut s = format!("({f}");
            for a in args {
                s.push(' ');
                s.push_str(&render_with(ts, a, step, name));
            }
            s.push(')');
            s
        }
        Term::Bind(q, v, body) => format!("({q} (({v} Int)) {})", render_with(ts, body, step, name)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::load;

    #[test]
    fn triangular_has_three_fragments_and_havocs_the_square() {
        let p = load(
            "Int N = nondet; Int i; Int s; Int NN; i = 0; s = 0; assume(N > 0);\n\
             while (i < N) { i = i + 1; s = s + i; } NN = N * N; assert(s == (NN + N) / 2);",
        )
        .unwrap()
        .program;
        let ts = encode(&p, HavocPolicy::default()).unwrap();
        assert_eq!(ts.locations.len(), 3);
        assert!(ts.havocked);
        assert_eq!(ts.fragments[1].errors.len(), 1);
        let exact = encode(&p, HavocPolicy::exact()).unwrap();
        assert!(!exact.havocked);
    }

    #[test]
    fn linear_assignment_is_an_equality() {
        let p = load("Int x; Int y; x = y + 1;").unwrap().program;
        let ts = encode(&p, HavocPolicy::default()).unwrap();
        assert!(!ts.havocked);
        let t = ts.declare_step(0);
        assert!(t.contains("(+ |y@0| 1)"), "{t}");
    }
}

/// An interval `[lo, hi)` given by literals and known to be empty.
fn empty_literal_range(lo: &Expr, hi: &Expr) -> bool {
    matches!((lo.as_int(), hi.as_int()), (Some(l), Some(h)) if h <= l)
}
