//! Which rewrite rules apply where.

use std::collections::BTreeMap;

use super::operator::{InstrumentationOperator, MetaKind, RewriteRule};
use crate::lang::{ControlPoint, Expr, Program, StmtKind, Type};

/// `Q`: for each applicable control point, the ids of the matching rules in
/// operator and rule order. The "leave unchanged" choice is implicit.
pub type Applicable = BTreeMap<ControlPoint, Vec<String>>;

fn is_meta(name: &str) -> bool {
    name.starts_with('?')
}

fn bind(pat: &Expr, e: &Expr, b: &mut BTreeMap<String, Expr>) -> bool {
    match (pat, e) {
        (Expr::Var(m), _) if is_meta(m) => match b.get(m) {
            Some(prev) => prev == e,
            None => {
                b.insert(m.clone(), e.clone());
                true
            }
        },
        (Expr::Unary(o1, x1), Expr::Unary(o2, x2)) => o1 == o2 && bind(x1, x2, b),
        (Expr::Binary(o1, l1, r1), Expr::Binary(o2, l2, r2)) => {
            o1 == o2 && bind(l1, l2, b) && bind(r1, r2, b)
        }
        (Expr::Select(a1, i1), Expr::Select(a2, i2)) => bind(a1, a2, b) && bind(i1, i2, b),
        (Expr::Store(a1, i1, v1), Expr::Store(a2, i2, v2)) => {
            bind(a1, a2, b) && bind(i1, i2, b) && bind(v1, v2, b)
        }
        (
            Expr::Quantified {
                kind: k1,
                array: a1,
                lo: l1,
                hi: h1,
                pred: p1,
            },
            Expr::Quantified {
                kind: k2,
                array: a2,
                lo: l2,
                hi: h2,
                pred: p2,
            },
        ) => k1 == k2 && p1.alpha_eq(p2) && bind(a1, a2, b) && bind(l1, l2, b) && bind(h1, h2, b),
        (
            Expr::Aggregate {
                hom: o1,
                array: a1,
                lo: l1,
                hi: h1,
            },
            Expr::Aggregate {
                hom: o2,
                array: a2,
                lo: l2,
                hi: h2,
            },
        ) => o1 == o2 && bind(a1, a2, b) && bind(l1, l2, b) && bind(h1, h2, b),
        _ => pat == e,
    }
}

fn admissible(kind: MetaKind, e: &Expr, types: &BTreeMap<String, Type>) -> bool {
    let var_ty = |t: Type| matches!(e, Expr::Var(v) if types.get(v) == Some(&t));
    match kind {
        MetaKind::IntVar => var_ty(Type::Int),
        MetaKind::BoolVar => var_ty(Type::Bool),
        MetaKind::ArrayVar => var_ty(Type::array_of(Type::Int)),
        MetaKind::IntLit => matches!(e, Expr::Int(_)),
        MetaKind::IntAtom => matches!(e, Expr::Int(_)) || var_ty(Type::Int),
    }
}

/// Meta-variable binding under which `rule` rewrites `target = value`.
pub fn match_rule(
    rule: &RewriteRule,
    target: &str,
    value: &Expr,
    types: &BTreeMap<String, Type>,
) -> Option<BTreeMap<String, Expr>> {
    let mut b = BTreeMap::new();
    b.insert(rule.target.clone(), Expr::Var(target.to_string()));
    if !bind(&rule.pattern, value, &mut b) {
        return None;
    }
    let ok = rule.metas.iter().all(|(m, k)| match b.get(m) {
        Some(e) => admissible(*k, e, types),
        None => false,
    });
    ok.then_some(b)
}

fn types_of(p: &Program) -> BTreeMap<String, Type> {
    p.decls.iter().map(|d| (d.name.clone(), d.ty.clone())).collect()
}

/// Computes `Q(p)` for every assignment of a normalized program.
pub fn applicable_points(p: &Program, ops: &[InstrumentationOperator]) -> Applicable {
    let types = types_of(p);
    let mut out = Applicable::new();
    p.body.walk(&mut |s| {
        if let StmtKind::Assign { target, value } = &s.kind {
            let mut rules = Vec::new();
            for op in ops {
                for r in &op.rules {
                    if match_rule(r, target, value, &types).is_some() {
                        rules.push(op.rule_ref(r));
                    }
                }
            }
            if !rules.is_empty() {
                out.insert(s.label, rules);
            }
        }
    });
    out
}

/// Looks up a fully qualified rule id such as `sum#1.store`.
pub fn resolve<'a>(
    ops: &'a [InstrumentationOperator],
    rule_ref: &str,
) -> Option<(&'a InstrumentationOperator, &'a RewriteRule)> {
    let (op_name, rule_id) = rule_ref.rsplit_once('.')?;
    let op = ops.iter().find(|o| o.name == op_name)?;
    Some((op, op.rule(rule_id)?))
}

/// Number of selections: the product of `|Q(p)| + 1` over all points.
pub fn space_size(q: &Applicable) -> u128 {
    q.values()
        .map(|v| v.len() as u128 + 1)
        .fold(1u128, |a, b| a.saturating_mul(b))
}
