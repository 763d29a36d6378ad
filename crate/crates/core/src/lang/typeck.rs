use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::parser::is_keyword;
use super::printer::{expr_to_string, print_stmt};

/// Prefix reserved for compiler-introduced temporaries.
pub const TEMP_PREFIX: &str = "__t";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("type error at {label}: {message} (rule: {rule}) in `{node}`")]
pub struct TypeError {
    pub label: ControlPoint,
    pub node: String,
    pub rule: String,
    pub message: String,
}

/// A program that passed the type checker, together with its typing environment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedProgram {
    pub program: Program,
    pub env: BTreeMap<String, Type>,
}

impl TypedProgram {
    pub fn type_of(&self, e: &Expr) -> Type {
        type_of(&self.env, e).expect("typed program")
    }
}

pub type Env = BTreeMap<String, Type>;

struct Checker<'a> {
    env: &'a Env,
    label: ControlPoint,
    errors: Vec<TypeError>,
}

impl Checker<'_> {
    fn err(&mut self, node: String, rule: &str, message: String) {
        self.errors.push(TypeError {
            label: self.label,
            node,
            rule: rule.to_string(),
            message,
        });
    }

    fn expect(&mut self, e: &Expr, want: &Type, locals: &Env, rule: &str) {
        if let Some(t) = self.expr(e, locals) {
            if &t != want {
                self.err(
                    expr_to_string(e),
                    rule,
                    format!("expected {want}, found {t}"),
                );
            }
        }
    }

    fn lambda(&mut self, l: &Lambda, elem: Type, want: Type, locals: &Env, rule: &str) {
        let mut inner = locals.clone();
        inner.insert(l.value_param.clone(), elem);
        inner.insert(l.index_param.clone(), Type::Int);
        self.expect(&l.body, &want, &inner, rule);
    }

    fn array_elem(&mut self, a: &Expr, locals: &Env, rule: &str) -> Option<Type> {
        match self.expr(a, locals)? {
            Type::Array(elem) => Some(*elem),
            t => {
                self.err(
                    expr_to_string(a),
                    rule,
                    format!("expected an array, found {t}"),
                );
                None
            }
        }
    }

    /// Returns `None` when the expression is ill-typed (errors are recorded).
    fn expr(&mut self, e: &Expr, locals: &Env) -> Option<Type> {
        match e {
            Expr::Int(_) | Expr::NegInf | Expr::PosInf => Some(Type::Int),
            Expr::Bool(_) => Some(Type::Bool),
            Expr::Var(v) => match locals.get(v).or_else(|| self.env.get(v)) {
                Some(t) => Some(t.clone()),
                None => {
                    self.err(v.clone(), "var", format!("undeclared variable `{v}`"));
                    None
                }
            },
            Expr::Unary(UnOp::Not, x) => {
                self.expect(x, &Type::Bool, locals, "not");
                Some(Type::Bool)
            }
            Expr::Unary(UnOp::Neg, x) => {
                self.expect(x, &Type::Int, locals, "neg");
                Some(Type::Int)
            }
            Expr::Binary(op, l, r) => match op {
                BinOp::Eq | BinOp::Ne => {
                    let lt = self.expr(l, locals);
                    let rt = self.expr(r, locals);
                    if let (Some(lt), Some(rt)) = (lt, rt) {
                        if lt != rt {
                            self.err(
                                expr_to_string(e),
                                "eq",
                                format!("operands have types {lt} and {rt}"),
                            );
                        }
                    }
                    Some(Type::Bool)
                }
                BinOp::And | BinOp::Or => {
                    self.expect(l, &Type::Bool, locals, op.symbol());
                    self.expect(r, &Type::Bool, locals, op.symbol());
                    Some(Type::Bool)
                }
                _ => {
                    let rule = op.symbol();
                    self.expect(l, &Type::Int, locals, rule);
                    self.expect(r, &Type::Int, locals, rule);
                    Some(if op.is_order() { Type::Bool } else { Type::Int })
                }
            },
            Expr::Select(a, i) => {
                let elem = self.array_elem(a, locals, "select");
                self.expect(i, &Type::Int, locals, "select");
                elem
            }
            Expr::Store(a, i, v) => {
                let elem = self.array_elem(a, locals, "store");
                self.expect(i, &Type::Int, locals, "store");
                let elem = elem?;
                self.expect(v, &elem, locals, "store");
                Some(Type::array_of(elem))
            }
            Expr::ConstArray(v, n) => {
                let t = self.expr(v, locals);
                self.expect(n, &Type::Int, locals, "const");
                Some(Type::array_of(t?))
            }
            Expr::Quantified {
                array,
                lo,
                hi,
                pred,
                kind,
            } => {
                let rule = match kind {
                    Quant::Forall => "forall",
                    Quant::Exists => "exists",
                };
                let elem = self.array_elem(array, locals, rule);
                self.expect(lo, &Type::Int, locals, rule);
                self.expect(hi, &Type::Int, locals, rule);
                if let Some(elem) = elem {
                    self.lambda(pred, elem, Type::Bool, locals, rule);
                }
                Some(Type::Bool)
            }
            Expr::Aggregate { hom, array, lo, hi } => {
                let rule = "aggregate";
                self.expect(lo, &Type::Int, locals, rule);
                self.expect(hi, &Type::Int, locals, rule);
                match hom {
                    HomId::Count(pred) => {
                        if let Some(elem) = self.array_elem(array, locals, rule) {
                            self.lambda(pred, elem, Type::Bool, locals, rule);
                        }
                    }
                    _ => self.expect(array, &Type::array_of(Type::Int), locals, rule),
                }
                Some(Type::Int)
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        self.label = s.label;
        let none = Env::new();
        match &s.kind {
            StmtKind::Skip => {}
            StmtKind::Assign { target, value } => match self.env.get(target).cloned() {
                None => self.err(
                    print_stmt(s).trim().to_string(),
                    "assign",
                    format!("undeclared variable `{target}`"),
                ),
                Some(t) => self.expect(value, &t, &none, "assign"),
            },
            StmtKind::Block(v) => v.iter().for_each(|c| self.stmt(c)),
            StmtKind::While { cond, body } => {
                self.expect(cond, &Type::Bool, &none, "while");
                self.stmt(body);
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.expect(cond, &Type::Bool, &none, "if");
                self.stmt(then_branch);
                self.stmt(else_branch);
            }
            StmtKind::Assert(c) => self.expect(c, &Type::Bool, &none, "assert"),
            StmtKind::Assume(c) => self.expect(c, &Type::Bool, &none, "assume"),
        }
    }
}

/// Type of an expression under `env`, or the first error.
pub fn type_of(env: &Env, e: &Expr) -> Result<Type, TypeError> {
    let mut c = Checker {
        env,
        label: ControlPoint(0),
        errors: vec![],
    };
    let t = c.expr(e, &Env::new());
    match (c.errors.into_iter().next(), t) {
        (Some(err), _) => Err(err),
        (None, Some(t)) => Ok(t),
        (None, None) => unreachable!("ill-typed expressions always record an error"),
    }
}

pub fn typecheck(program: Program) -> Result<TypedProgram, Vec<TypeError>> {
    let mut errors = Vec::new();
    let mut env = Env::new();
    let mut seen = BTreeSet::new();
    for d in &program.decls {
        let bad = |message: String| TypeError {
            label: ControlPoint(0),
            node: format!("{} {}", d.ty, d.name),
            rule: "decl".into(),
            message,
        };
        if !seen.insert(d.name.clone()) {
            errors.push(bad(format!("duplicate declaration of `{}`", d.name)));
        }
        if is_keyword(&d.name) {
            errors.push(bad(format!("`{}` is a keyword", d.name)));
        }
        env.insert(d.name.clone(), d.ty.clone());
    }
    let mut c = Checker {
        env: &env,
        label: ControlPoint(0),
        errors: vec![],
    };
    c.stmt(&program.body);
    errors.extend(c.errors);
    if errors.is_empty() {
        Ok(TypedProgram { program, env })
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, parse_expr};

    fn env() -> Env {
        let mut e = Env::new();
        e.insert("a".into(), Type::array_of(Type::Int));
        e.insert("i".into(), Type::Int);
        e
    }

    #[test]
    fn select_has_element_type() {
        let e = parse_expr("select(a, i)").unwrap();
        assert_eq!(type_of(&env(), &e).unwrap(), Type::Int);
    }

    #[test]
    fn add_requires_ints() {
        let err = type_of(&env(), &parse_expr("true + 1").unwrap()).unwrap_err();
        assert_eq!(err.rule, "+");
    }

    #[test]
    fn store_index_must_be_int() {
        let err = type_of(&env(), &parse_expr("store(a, true, 0)").unwrap()).unwrap_err();
        assert_eq!(err.rule, "store");
        assert_eq!(err.node, "true");
    }

    #[test]
    fn quantifier_binds_lambda_params() {
        let e = parse_expr("forall(a, 0, i, lambda(x, k). x == k)").unwrap();
        assert_eq!(type_of(&env(), &e).unwrap(), Type::Bool);
        let e = parse_expr("\\max(a, 0, i) + \\count(a, 0, i, lambda(x, k). x > 0)").unwrap();
        assert_eq!(type_of(&env(), &e).unwrap(), Type::Int);
    }

    #[test]
    fn reports_every_violation() {
        let p = parse("Int x; Bool b; x = true; b = 1; y = 2;").unwrap();
        assert_eq!(typecheck(p).unwrap_err().len(), 3);
    }
}
