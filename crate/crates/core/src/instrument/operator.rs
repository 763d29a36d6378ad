use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::interp::Value;
use crate::lang::{parse, Expr, Program, Stmt, StmtKind, Type};

/// What a meta-variable may be instantiated with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetaKind {
    /// A program variable of type Int.
    IntVar,
    /// A program variable of type Bool.
    BoolVar,
    /// A program variable of type `Array Int`.
    ArrayVar,
    /// An integer literal.
    IntLit,
    /// An Int variable or an integer literal.
    IntAtom,
}

impl MetaKind {
    pub fn is_var(self) -> bool {
        matches!(self, MetaKind::IntVar | MetaKind::BoolVar | MetaKind::ArrayVar)
    }

    pub fn ty(self) -> Type {
        match self {
            MetaKind::BoolVar => Type::Bool,
            MetaKind::ArrayVar => Type::array_of(Type::Int),
            _ => Type::Int,
        }
    }
}

/// `target = pattern  ~>  replacement`, with meta-variables written `?name`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteRule {
    pub id: String,
    /// Meta-variable standing for the assigned variable.
    pub target: String,
    pub pattern: Expr,
    pub metas: Vec<(String, MetaKind)>,
    pub replacement: Vec<Stmt>,
}

impl RewriteRule {
    /// Builds a rule from schema text such as `"?x = ?x + ?alpha"`.
    pub fn from_text(id: &str, pattern: &str, metas: &[(&str, MetaKind)], replacement: &str) -> Self {
        let (target, pattern) = match schema(pattern).pop().map(|s| s.kind) {
            Some(StmtKind::Assign { target, value }) => (target, value),
            _ => panic!("rule pattern must be one assignment: {pattern}"),
        };
        RewriteRule {
            id: id.to_string(),
            target,
            pattern,
            metas: metas.iter().map(|(n, k)| (format!("?{n}"), *k)).collect(),
            replacement: schema(replacement),
        }
    }

    pub fn meta_kind(&self, name: &str) -> Option<MetaKind> {
        self.metas.iter().find(|(n, _)| n == name).map(|(_, k)| *k)
    }

    /// The replacement with meta-variables substituted and literal products folded.
    pub fn instantiate(&self, binding: &BTreeMap<String, Expr>) -> Vec<Stmt> {
        self.replacement
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.walk_mut(&mut |st| subst_stmt(st, binding));
                s
            })
            .collect()
    }

    /// The rule's own assignment `target = pattern`, instantiated.
    pub fn instantiate_pattern(&self, binding: &BTreeMap<String, Expr>) -> (String, Expr) {
        let target = match binding.get(&self.target) {
            Some(Expr::Var(v)) => v.clone(),
            _ => panic!("target meta-variable must be bound to a variable"),
        };
        (target, self.pattern.substitute(binding).fold_literal_products())
    }

    /// Variables assigned by the replacement schema (meta-variables included).
    pub fn assigned(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for s in &self.replacement {
            v.extend(s.assigned_vars());
        }
        v.sort();
        v.dedup();
        v
    }

    fn rename_ghosts(&mut self, map: &BTreeMap<String, String>) {
        let exprs: BTreeMap<String, Expr> =
            map.iter().map(|(k, v)| (k.clone(), Expr::Var(v.clone()))).collect();
        for s in &mut self.replacement {
            s.walk_mut(&mut |st| {
                subst_stmt(st, &exprs);
            });
        }
    }
}

fn subst_stmt(st: &mut Stmt, binding: &BTreeMap<String, Expr>) {
    let sub = |e: &Expr| e.substitute(binding).fold_literal_products();
    st.kind = match &st.kind {
        StmtKind::Assign { target, value } => {
            let target = match binding.get(target) {
                Some(Expr::Var(v)) => v.clone(),
                Some(e) => panic!("cannot assign to {e}"),
                None => target.clone(),
            };
            StmtKind::Assign {
                target,
                value: sub(value),
            }
        }
        StmtKind::Assert(c) => StmtKind::Assert(sub(c)),
        StmtKind::Assume(c) => StmtKind::Assume(sub(c)),
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => StmtKind::If {
            cond: sub(cond),
            then_branch: then_branch.clone(),
            else_branch: else_branch.clone(),
        },
        StmtKind::While { cond, body } => StmtKind::While {
            cond: sub(cond),
            body: body.clone(),
        },
        k => k.clone(),
    };
}

/// Parses statement schemas (no declarations needed).
pub fn schema(src: &str) -> Vec<Stmt> {
    let p = parse(src).unwrap_or_else(|e| panic!("bad schema `{src}`: {e}"));
    match p.body.kind {
        StmtKind::Block(v) => v,
        _ => unreachable!(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GhostVar {
    pub name: String,
    pub ty: Type,
    pub init: Value,
}

/// Ghost variables, rewrite rules and the instrumentation invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstrumentationOperator {
    pub name: String,
    pub ghosts: Vec<GhostVar>,
    pub rules: Vec<RewriteRule>,
    pub invariant: Expr,
}

impl fmt::Display for InstrumentationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

impl InstrumentationOperator {
    pub fn ghost_names(&self) -> Vec<String> {
        self.ghosts.iter().map(|g| g.name.clone()).collect()
    }

    pub fn is_ghost(&self, name: &str) -> bool {
        self.ghosts.iter().any(|g| g.name == name)
    }

    pub fn rule(&self, id: &str) -> Option<&RewriteRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Fully qualified rule id, e.g. `square.R2`.
    pub fn rule_ref(&self, rule: &RewriteRule) -> String {
        format!("{}.{}", self.name, rule.id)
    }

    /// A copy with every ghost renamed `g` to `g_k` and name `name#k`.
    pub fn instance(&self, k: usize) -> InstrumentationOperator {
        if k == 0 {
            return self.clone();
        }
        let map: BTreeMap<String, String> = self
            .ghosts
            .iter()
            .map(|g| (g.name.clone(), format!("{}_{k}", g.name)))
            .collect();
        let mut out = self.clone();
        out.name = format!("{}#{k}", self.name);
        for g in &mut out.ghosts {
            g.name = map[&g.name].clone();
        }
        for r in &mut out.rules {
            r.rename_ghosts(&map);
        }
        out.invariant = self.invariant.rename(&map);
        out
    }

    /// State holding the initial ghost values only.
    pub fn initial_ghost_state(&self) -> crate::interp::State {
        let mut s = crate::interp::State::new();
        for g in &self.ghosts {
            s.set(&g.name, g.init.clone());
        }
        s
    }

    /// Checks that a program's variables do not collide with the ghosts.
    pub fn clashes_with(&self, p: &Program) -> bool {
        self.ghosts.iter().any(|g| p.decl(&g.name).is_some())
    }
}

/// An expression denoting `v`.
pub fn value_to_expr(v: &Value) -> Expr {
    match v {
        Value::Int(i) => Expr::Int(i.clone()),
        Value::NegInf => Expr::NegInf,
        Value::PosInf => Expr::PosInf,
        Value::Bool(b) => Expr::Bool(*b),
        Value::Array(a) => {
            let mut e = Expr::const_array(value_to_expr(a.default_value()), Expr::Int(BigInt::from(0)));
            for (i, x) in a.overrides() {
                e = Expr::store(e, Expr::Int(i.clone()), value_to_expr(x));
            }
            e
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instantiation_folds_literal_products() {
        let r = RewriteRule::from_text(
            "R2",
            "?x = ?x + ?alpha;",
            &[("x", MetaKind::IntVar), ("alpha", MetaKind::IntLit)],
            "x_sq = x_sq + 2 * ?alpha * ?x + ?alpha * ?alpha; ?x = ?x + ?alpha;",
        );
        let mut b = BTreeMap::new();
        b.insert("?x".to_string(), Expr::var("i"));
        b.insert("?alpha".to_string(), Expr::int(1));
        let text: Vec<String> = r
            .instantiate(&b)
            .iter()
            .map(|s| crate::lang::print_stmt(s).trim().to_string())
            .collect();
        assert_eq!(text, vec!["x_sq = x_sq + 2 * i + 1;", "i = i + 1;"]);
        assert_eq!(r.assigned(), vec!["?x".to_string(), "x_sq".to_string()]);
    }
}
