//! Canonical pretty-printer. `parse(print(p))` reproduces `p` for pre-order
//! labelled programs.

use std::fmt::Write;

use super::ast::*;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => match op {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        },
        Expr::Unary(..) => 7,
        Expr::Int(v) if v.sign() == num_bigint::Sign::Minus => 7,
        Expr::NegInf | Expr::PosInf => 7,
        _ => 8,
    }
}

fn write_child(out: &mut String, e: &Expr, min: u8) {
    if prec(e) < min {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_lambda(out: &mut String, l: &Lambda) {
    let _ = write!(out, "lambda({}, {}). ", l.value_param, l.index_param);
    write_expr(out, &l.body);
}

pub fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::NegInf => out.push_str("-inf"),
        Expr::PosInf => out.push_str("+inf"),
        Expr::Var(v) => out.push_str(v),
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            // `-3` would re-parse as a literal and `-inf` as a sentinel.
            let literal = matches!(**inner, Expr::Int(_) | Expr::NegInf | Expr::PosInf)
                && *op == UnOp::Neg;
            if literal {
                out.push('(');
                write_expr(out, inner);
                out.push(')');
            } else {
                write_child(out, inner, 7);
            }
        }
        Expr::Binary(op, l, r) => {
            let p = prec(e);
            let chained = matches!(op, BinOp::Or | BinOp::And) || op.is_arith();
            write_child(out, l, if chained { p } else { p + 1 });
            let _ = write!(out, " {} ", op.symbol());
            write_child(out, r, p + 1);
        }
        Expr::Select(a, i) => {
            out.push_str("select(");
            write_expr(out, a);
            out.push_str(", ");
            write_expr(out, i);
            out.push(')');
        }
        Expr::Store(a, i, v) => {
            out.push_str("store(");
            write_expr(out, a);
            out.push_str(", ");
            write_expr(out, i);
            out.push_str(", ");
            write_expr(out, v);
            out.push(')');
        }
        Expr::ConstArray(v, n) => {
            out.push_str("const(");
            write_expr(out, v);
            out.push_str(", ");
            write_expr(out, n);
            out.push(')');
        }
        Expr::Quantified {
            kind,
            array,
            lo,
            hi,
            pred,
        } => {
            out.push_str(match kind {
                Quant::Forall => "forall(",
                Quant::Exists => "exists(",
            });
            for a in [array, lo, hi] {
                write_expr(out, a);
                out.push_str(", ");
            }
            write_lambda(out, pred);
            out.push(')');
        }
        Expr::Aggregate { hom, array, lo, hi } => {
            out.push_str(hom.keyword());
            out.push('(');
            write_expr(out, array);
            out.push_str(", ");
            write_expr(out, lo);
            out.push_str(", ");
            write_expr(out, hi);
            if let HomId::Count(p) = hom {
                out.push_str(", ");
                write_lambda(out, p);
            }
            out.push(')');
        }
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&expr_to_string(self))
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn marker(out: &mut String, s: &Stmt) {
    if let Some(m) = &s.marker {
        let _ = write!(out, " /*{m}*/");
    }
}

/// Writes the statements of a body block between braces.
fn write_body(out: &mut String, body: &Stmt, depth: usize) {
    out.push_str("{\n");
    match &body.kind {
        StmtKind::Block(stmts) => {
            for s in stmts {
                write_stmt(out, s, depth + 1);
            }
        }
        _ => write_stmt(out, body, depth + 1),
    }
    indent(out, depth);
    out.push('}');
}

pub fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Skip => out.push_str("skip;"),
        StmtKind::Assign { target, value } => {
            let _ = write!(out, "{target} = ");
            write_expr(out, value);
            out.push(';');
        }
        StmtKind::Assert(c) | StmtKind::Assume(c) => {
            out.push_str(if matches!(s.kind, StmtKind::Assert(_)) {
                "assert("
            } else {
                "assume("
            });
            write_expr(out, c);
            out.push_str(");");
        }
        StmtKind::Block(_) => write_body(out, s, depth),
        StmtKind::While { cond, body } => {
            out.push_str("while (");
            write_expr(out, cond);
            out.push_str(") ");
            write_body(out, body, depth);
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            out.push_str("if (");
            write_expr(out, cond);
            out.push_str(") ");
            write_body(out, then_branch, depth);
            let empty_else = matches!(&else_branch.kind, StmtKind::Block(v) if v.is_empty());
            if !empty_else {
                out.push_str(" else ");
                write_body(out, else_branch, depth);
            }
        }
    }
    marker(out, s);
    out.push('\n');
}

pub fn print_stmt(s: &Stmt) -> String {
    let mut out = String::new();
    write_stmt(&mut out, s, 0);
    out
}

/// Canonical source text of a program.
pub fn print(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.decls {
        let _ = write!(out, "{} {}", d.ty, d.name);
        if d.input {
            out.push_str(" = nondet");
        }
        out.push_str(";\n");
    }
    match &p.body.kind {
        StmtKind::Block(stmts) => {
            for s in stmts {
                write_stmt(&mut out, s, 0);
            }
        }
        _ => write_stmt(&mut out, &p.body, 0),
    }
    out
}

impl std::fmt::Display for Program {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    #[test]
    fn precedence_is_respected() {
        let e = Expr::mul(Expr::add(Expr::var("a"), Expr::int(1)), Expr::var("b"));
        assert_eq!(expr_to_string(&e), "(a + 1) * b");
        let e = Expr::sub(Expr::var("a"), Expr::sub(Expr::var("b"), Expr::var("c")));
        assert_eq!(expr_to_string(&e), "a - (b - c)");
    }

    #[test]
    fn round_trips_triangular() {
        let src = "Int N = nondet; Int i; Int s; Int NN;\n\
                   i = 0; /*A*/ s = 0; /*B*/ assume(N > 0);\n\
                   while (i < N) { i = i + 1; /*C*/ s = s + i; }\n\
                   NN = N * N; /*D*/ assert(s == (NN + N) / 2);";
        let p = parse(src).unwrap();
        let q = parse(&print(&p)).unwrap();
        assert_eq!(p, q);
        assert!(print(&p).contains("i = i + 1; /*C*/"));
    }
}
