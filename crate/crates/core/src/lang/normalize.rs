//! Normal form: array accesses, quantifiers and aggregates only appear as the
//! whole right-hand side of an assignment, with variables or literals as
//! arguments.

use super::ast::*;
use super::typeck::{type_of, Env, TypedProgram, TEMP_PREFIX};

struct Normalizer {
    env: Env,
    new_decls: Vec<Decl>,
    next_temp: usize,
    next_label: u32,
}

impl Normalizer {
    fn fresh_label(&mut self) -> ControlPoint {
        let l = ControlPoint(self.next_label);
        self.next_label += 1;
        l
    }

    fn temp(&mut self, value: Expr, pre: &mut Vec<Stmt>) -> Expr {
        let ty = type_of(&self.env, &value).expect("normalizing a typed program");
        let name = loop {
            let n = format!("{TEMP_PREFIX}{}", self.next_temp);
            self.next_temp += 1;
            if !self.env.contains_key(&n) {
                break n;
            }
        };
        self.env.insert(name.clone(), ty.clone());
        self.new_decls.push(Decl {
            name: name.clone(),
            ty,
            input: false,
        });
        let mut s = Stmt::assign(&name, value);
        s.label = self.fresh_label();
        pre.push(s);
        Expr::Var(name)
    }

    /// Replaces every special sub-expression (outside lambda bodies) by a temporary.
    fn hoist(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> Expr {
        if e.is_special() {
            let n = self.special(e, pre);
            return self.temp(n, pre);
        }
        match e {
            Expr::Unary(op, x) => Expr::Unary(*op, Box::new(self.hoist(x, pre))),
            Expr::Binary(op, l, r) => {
                let l = self.hoist(l, pre);
                let r = self.hoist(r, pre);
                Expr::bin(*op, l, r)
            }
            Expr::ConstArray(v, n) => {
                let v = self.hoist(v, pre);
                let n = self.hoist(n, pre);
                Expr::const_array(v, n)
            }
            _ => e.clone(),
        }
    }

    fn atom(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> Expr {
        if e.is_atom() {
            return e.clone();
        }
        let h = self.hoist(e, pre);
        if h.is_atom() {
            h
        } else {
            self.temp(h, pre)
        }
    }

    fn array_var(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> Expr {
        if let Expr::Var(_) = e {
            return e.clone();
        }
        let h = self.hoist(e, pre);
        if let Expr::Var(_) = h {
            h
        } else {
            self.temp(h, pre)
        }
    }

    /// A special expression with normalized arguments.
    fn special(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> Expr {
        match e {
            Expr::Select(a, i) => {
                let a = self.array_var(a, pre);
                let i = self.atom(i, pre);
                Expr::select(a, i)
            }
            Expr::Store(a, i, v) => {
                let a = self.array_var(a, pre);
                let i = self.atom(i, pre);
                let v = self.atom(v, pre);
                Expr::store(a, i, v)
            }
            Expr::Quantified {
                kind,
                array,
                lo,
                hi,
                pred,
            } => {
                let a = self.array_var(array, pre);
                let l = self.atom(lo, pre);
                let u = self.atom(hi, pre);
                Expr::quantified(*kind, a, l, u, pred.clone())
            }
            Expr::Aggregate { hom, array, lo, hi } => {
                let a = self.array_var(array, pre);
                let l = self.atom(lo, pre);
                let u = self.atom(hi, pre);
                Expr::aggregate(hom.clone(), a, l, u)
            }
            _ => unreachable!("not a special expression"),
        }
    }

    fn relabel_copy(&mut self, stmts: &[Stmt]) -> Vec<Stmt> {
        stmts
            .iter()
            .map(|s| {
                let mut c = s.clone();
                c.walk_mut(&mut |x| x.label = ControlPoint(u32::MAX));
                c.walk_mut(&mut |x| {
                    x.label = ControlPoint(self.next_label);
                    self.next_label += 1;
                });
                c
            })
            .collect()
    }

    fn as_block(&mut self, mut stmts: Vec<Stmt>) -> Stmt {
        if stmts.len() == 1 {
            return stmts.pop().unwrap();
        }
        let mut b = Stmt::block(stmts);
        b.label = self.fresh_label();
        b
    }

    fn body(&mut self, s: &Stmt) -> Stmt {
        let v = self.stmt(s);
        self.as_block(v)
    }

    /// Normalized replacement for `s`: leading temporaries followed by `s`.
    fn stmt(&mut self, s: &Stmt) -> Vec<Stmt> {
        let mut pre = Vec::new();
        let mut out = s.clone();
        match &s.kind {
            StmtKind::Skip => {}
            StmtKind::Assign { target, value } => {
                let v = if value.is_special() {
                    self.special(value, &mut pre)
                } else {
                    self.hoist(value, &mut pre)
                };
                out.kind = StmtKind::Assign {
                    target: target.clone(),
                    value: v,
                };
            }
            StmtKind::Assert(c) => out.kind = StmtKind::Assert(self.hoist(c, &mut pre)),
            StmtKind::Assume(c) => out.kind = StmtKind::Assume(self.hoist(c, &mut pre)),
            StmtKind::Block(v) => {
                let mut inner = Vec::new();
                for c in v {
                    inner.extend(self.stmt(c));
                }
                out.kind = StmtKind::Block(inner);
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let c = self.hoist(cond, &mut pre);
                out.kind = StmtKind::If {
                    cond: c,
                    then_branch: Box::new(self.body(then_branch)),
                    else_branch: Box::new(self.body(else_branch)),
                };
            }
            StmtKind::While { cond, body } => {
                let c = self.hoist(cond, &mut pre);
                let mut b = self.body(body);
                if !pre.is_empty() {
                    let again = self.relabel_copy(&pre);
                    match &mut b.kind {
                        StmtKind::Block(v) => v.extend(again),
                        _ => {
                            let mut stmts = vec![b];
                            stmts.extend(again);
                            b = Stmt::block(stmts);
                            b.label = self.fresh_label();
                        }
                    }
                }
                out.kind = StmtKind::While {
                    cond: c,
                    body: Box::new(b),
                };
            }
        }
        pre.push(out);
        pre
    }
}

/// Brings a typed program into normal form. Idempotent.
pub fn normalize(tp: TypedProgram) -> TypedProgram {
    let TypedProgram { program, env } = tp;
    let mut n = Normalizer {
        env,
        new_decls: vec![],
        next_temp: 0,
        next_label: program.next_label(),
    };
    let body = n.body(&program.body);
    let mut decls = program.decls;
    decls.extend(n.new_decls);
    TypedProgram {
        program: Program::new(decls, body),
        env: n.env,
    }
}

/// Whether a statement tree is already in normal form.
pub fn is_normal(s: &Stmt) -> bool {
    let flat = |e: &Expr| !e.any(&|x| x.is_special());
    let args_ok = |e: &Expr| match e {
        Expr::Select(a, i) => a.as_var().is_some() && i.is_atom(),
        Expr::Store(a, i, v) => a.as_var().is_some() && i.is_atom() && v.is_atom(),
        Expr::Quantified { array, lo, hi, .. } | Expr::Aggregate { array, lo, hi, .. } => {
            array.as_var().is_some() && lo.is_atom() && hi.is_atom()
        }
        _ => false,
    };
    let mut ok = true;
    s.walk(&mut |s| {
        ok &= match &s.kind {
            StmtKind::Assign { value, .. } if value.is_special() => args_ok(value),
            _ => s.exprs().into_iter().all(flat),
        }
    });
    ok
}
