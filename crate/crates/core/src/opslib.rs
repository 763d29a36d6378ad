//! The concrete instrumentation operators: squares, array quantifiers, and
//! the max, min and sum aggregates.

use crate::instrument::{GhostVar, InstrumentationOperator, MetaKind, RewriteRule};
use crate::interp::{ArrayValue, Value};
use crate::lang::{expr_to_string, parse_expr, Expr, Lambda, Type};

use MetaKind::{ArrayVar, BoolVar, IntAtom, IntLit, IntVar};

fn ghost(name: &str, ty: Type, init: Value) -> GhostVar {
    GhostVar {
        name: name.into(),
        ty,
        init,
    }
}

fn int_ghost(name: &str) -> GhostVar {
    ghost(name, Type::Int, Value::int(0))
}

fn array_ghost(name: &str) -> GhostVar {
    ghost(
        name,
        Type::array_of(Type::Int),
        Value::Array(ArrayValue::constant(Value::int(0))),
    )
}

fn inv(src: &str) -> Expr {
    parse_expr(src).unwrap_or_else(|e| panic!("bad invariant `{src}`: {e}"))
}

fn square_rules() -> Vec<RewriteRule> {
    vec![
        RewriteRule::from_text(
            "R1",
            "?x = ?alpha;",
            &[("x", IntVar), ("alpha", IntLit)],
            "?x = ?alpha; x_sq = ?alpha * ?alpha; x_shad = ?x;",
        ),
        RewriteRule::from_text(
            "R2",
            "?x = ?x + ?alpha;",
            &[("x", IntVar), ("alpha", IntLit)],
            "assert(?x == x_shad); x_sq = x_sq + 2 * ?alpha * ?x + ?alpha * ?alpha; \
             ?x = ?x + ?alpha; x_shad = ?x;",
        ),
        RewriteRule::from_text(
            "R3",
            "?x = ?alpha * ?x;",
            &[("x", IntVar), ("alpha", IntLit)],
            "assert(?x == x_shad); x_sq = ?alpha * ?alpha * x_sq; ?x = ?alpha * ?x; x_shad = ?x;",
        ),
        RewriteRule::from_text(
            "R4",
            "?y = ?x * ?x;",
            &[("y", IntVar), ("x", IntVar)],
            "assert(?x == x_shad); ?y = x_sq;",
        ),
    ]
}

/// Tracks `x_sq == x_shad * x_shad` so that squares become linear.
pub fn make_square() -> InstrumentationOperator {
    InstrumentationOperator {
        name: "square".into(),
        ghosts: vec![int_ghost("x_sq"), int_ghost("x_shad")],
        rules: square_rules(),
        invariant: inv("x_sq == x_shad * x_shad"),
    }
}

/// The square operator with a wrong invariant, for testing certification.
pub fn make_square_mutated() -> InstrumentationOperator {
    InstrumentationOperator {
        name: "square_mutated".into(),
        invariant: inv("x_sq == x_shad"),
        ..make_square()
    }
}

fn lambda_text(p: &Lambda) -> String {
    format!(
        "lambda({}, {}). {}",
        p.value_param,
        p.index_param,
        expr_to_string(&p.body)
    )
}

fn applied(p: &Lambda, value: &str, index: &str) -> String {
    format!("({})", expr_to_string(&p.apply(&Expr::var(value), &Expr::var(index))))
}

/// Ghost interval bookkeeping shared by the store and select rules: reset
/// on an empty or far interval, extend on an adjacent index.
const FAR: &str = "qu_lo == qu_hi || ?i < qu_lo - 1 || ?i > qu_hi";
const EXTEND: &str = "if (qu_lo - 1 == ?i) { qu_lo = ?i; } else { if (qu_hi == ?i) { qu_hi = ?i + 1; } }";

/// The quantifier operators differ only in the connective and the value of
/// the empty interval; `forall` is `(and, true)`, `exists` is `(or, false)`.
fn quantifier(name: &str, keyword: &str, p: &Lambda) -> InstrumentationOperator {
    let universal = keyword == "forall";
    let (join, empty) = if universal { ("&&", "true") } else { ("||", "false") };
    let pxi = applied(p, "?x", "?i");
    let pai = applied(p, "select(?a, ?i)", "?i");
    // An inside store may remove the only element deciding qu_P.
    let overwrite = if universal {
        format!("({pxi} && !qu_P && qu_lo <= ?i && ?i < qu_hi)")
    } else {
        format!("(!{pxi} && qu_P && qu_lo <= ?i && ?i < qu_hi)")
    };
    let store = format!(
        "if ({FAR} || {overwrite}) {{ qu_lo = ?i; qu_hi = ?i + 1; qu_P = {pxi}; }} \
         else {{ assert(qu_ar == ?a); qu_P = qu_P {join} {pxi}; {EXTEND} }} \
         ?b = store(?a, ?i, ?x); qu_ar = ?b;"
    );
    let select = format!(
        "if ({FAR}) {{ qu_lo = ?i; qu_hi = ?i + 1; qu_P = {pai}; qu_ar = ?a; }} \
         else {{ assert(qu_ar == ?a); qu_P = qu_P {join} {pai}; {EXTEND} }} \
         ?x = select(?a, ?i);"
    );
    // When qu_P holds for forall (fails for exists) any sub-interval of the
    // tracked one has the same value; otherwise any super-interval does.
    let sub = "assert(qu_ar == ?a && ?l >= qu_lo && ?u <= qu_hi);";
    let sup = "assert(qu_ar == ?a && ?l <= qu_lo && ?u >= qu_hi && qu_lo < qu_hi);";
    let (when_p, when_not_p) = if universal { (sub, sup) } else { (sup, sub) };
    let assign = format!(
        "if (?u <= ?l) {{ ?r = {empty}; }} \
         else {{ if (qu_P) {{ {when_p} }} else {{ {when_not_p} }} ?r = qu_P; }}"
    );
    let quant = format!("{keyword}(qu_ar, qu_lo, qu_hi, {})", lambda_text(p));
    InstrumentationOperator {
        name: name.into(),
        ghosts: vec![
            array_ghost("qu_ar"),
            int_ghost("qu_lo"),
            int_ghost("qu_hi"),
            ghost("qu_P", Type::Bool, Value::Bool(universal)),
        ],
        rules: vec![
            RewriteRule::from_text(
                "store",
                "?b = store(?a, ?i, ?x);",
                &[("b", ArrayVar), ("a", ArrayVar), ("i", IntAtom), ("x", IntAtom)],
                &store,
            ),
            RewriteRule::from_text(
                "select",
                "?x = select(?a, ?i);",
                &[("x", IntVar), ("a", ArrayVar), ("i", IntAtom)],
                &select,
            ),
            RewriteRule::from_text(
                keyword,
                &format!("?r = {keyword}(?a, ?l, ?u, {});", lambda_text(p)),
                &[("r", BoolVar), ("a", ArrayVar), ("l", IntAtom), ("u", IntAtom)],
                &assign,
            ),
        ],
        invariant: inv(&format!("qu_lo == qu_hi || (qu_lo < qu_hi && qu_P == {quant})")),
    }
}

/// Tracks whether `P` holds on every element of an interval of an array.
pub fn make_forall(p: &Lambda) -> InstrumentationOperator {
    quantifier("forall", "forall", p)
}

/// Tracks whether `P` holds on some element of an interval of an array.
pub fn make_exists(p: &Lambda) -> InstrumentationOperator {
    quantifier("exists", "exists", p)
}

/// Max and min differ in the comparison and the empty-interval value.
fn extremum(name: &str, better: &str, neutral: &str) -> InstrumentationOperator {
    let far = "ag_lo == ag_hi || ?i < ag_lo - 1 || ?i > ag_hi";
    let extend = "if (ag_lo - 1 == ?i) { ag_lo = ?i; } else { if (ag_hi == ?i) { ag_hi = ?i + 1; } }";
    let store = format!(
        "if ({far} || ?i == ag_max_idx) {{ ag_lo = ?i; ag_hi = ?i + 1; ag_max = ?x; ag_max_idx = ?i; }} \
         else {{ assert(ag_ar == ?a); if (?x {better} ag_max) {{ ag_max = ?x; ag_max_idx = ?i; }} {extend} }} \
         ?b = store(?a, ?i, ?x); ag_ar = ?b;"
    );
    let select = format!(
        "if ({far}) {{ ag_lo = ?i; ag_hi = ?i + 1; ag_max = select(?a, ?i); ag_max_idx = ?i; ag_ar = ?a; }} \
         else {{ assert(ag_ar == ?a); \
         if (select(?a, ?i) {better} ag_max) {{ ag_max = select(?a, ?i); ag_max_idx = ?i; }} {extend} }} \
         ?x = select(?a, ?i);"
    );
    let aggregate = format!(
        "if (?u <= ?l) {{ ?r = {neutral}; }} \
         else {{ assert(ag_ar == ?a && ?l == ag_lo && ?u == ag_hi); ?r = ag_max; }}"
    );
    InstrumentationOperator {
        name: name.into(),
        ghosts: vec![
            int_ghost("ag_lo"),
            int_ghost("ag_hi"),
            int_ghost("ag_max_idx"),
            int_ghost("ag_max"),
            array_ghost("ag_ar"),
        ],
        rules: vec![
            RewriteRule::from_text(
                "store",
                "?b = store(?a, ?i, ?x);",
                &[("b", ArrayVar), ("a", ArrayVar), ("i", IntAtom), ("x", IntAtom)],
                &store,
            ),
            RewriteRule::from_text(
                "select",
                "?x = select(?a, ?i);",
                &[("x", IntVar), ("a", ArrayVar), ("i", IntAtom)],
                &select,
            ),
            RewriteRule::from_text(
                "aggregate",
                &format!("?r = \\{name}(?a, ?l, ?u);"),
                &[("r", IntVar), ("a", ArrayVar), ("l", IntAtom), ("u", IntAtom)],
                &aggregate,
            ),
        ],
        invariant: inv(&format!(
            "ag_lo == ag_hi || (ag_lo <= ag_max_idx && ag_max_idx < ag_hi && \
             ag_max == \\{name}(ag_ar, ag_lo, ag_hi) && ag_max == select(ag_ar, ag_max_idx))"
        )),
    }
}

/// Tracks the maximum of an interval and an index where it is attained.
pub fn make_max() -> InstrumentationOperator {
    extremum("max", ">", "-inf")
}

/// Order dual of [`make_max`]; the ghosts keep their `ag_max` names.
pub fn make_min() -> InstrumentationOperator {
    extremum("min", "<", "+inf")
}

/// Tracks the sum of an interval. Stores inside the interval subtract the
/// overwritten element.
pub fn make_sum() -> InstrumentationOperator {
    let far = "ag_lo == ag_hi || ?i < ag_lo - 1 || ?i > ag_hi";
    let store = format!(
        "if ({far}) {{ ag_lo = ?i; ag_hi = ?i + 1; ag_sum = ?x; }} \
         else {{ assert(ag_ar == ?a); \
         if (ag_lo <= ?i && ?i < ag_hi) {{ ag_sum = ag_sum - select(ag_ar, ?i) + ?x; }} \
         else {{ if (ag_lo - 1 == ?i) {{ ag_lo = ?i; }} else {{ ag_hi = ?i + 1; }} ag_sum = ag_sum + ?x; }} }} \
         ?b = store(?a, ?i, ?x); ag_ar = ?b;"
    );
    let select = format!(
        "if ({far}) {{ ag_lo = ?i; ag_hi = ?i + 1; ag_sum = select(?a, ?i); ag_ar = ?a; }} \
         else {{ assert(ag_ar == ?a); \
         if (ag_lo - 1 == ?i) {{ ag_lo = ?i; ag_sum = ag_sum + select(?a, ?i); }} \
         else {{ if (ag_hi == ?i) {{ ag_hi = ?i + 1; ag_sum = ag_sum + select(?a, ?i); }} }} }} \
         ?x = select(?a, ?i);"
    );
    let aggregate = "if (?u <= ?l) { ?r = 0; } \
         else { assert(ag_ar == ?a && ?l == ag_lo && ?u == ag_hi); ?r = ag_sum; }";
    InstrumentationOperator {
        name: "sum".into(),
        ghosts: vec![
            int_ghost("ag_lo"),
            int_ghost("ag_hi"),
            int_ghost("ag_sum"),
            array_ghost("ag_ar"),
        ],
        rules: vec![
            RewriteRule::from_text(
                "store",
                "?b = store(?a, ?i, ?x);",
                &[("b", ArrayVar), ("a", ArrayVar), ("i", IntAtom), ("x", IntAtom)],
                &store,
            ),
            RewriteRule::from_text(
                "select",
                "?x = select(?a, ?i);",
                &[("x", IntVar), ("a", ArrayVar), ("i", IntAtom)],
                &select,
            ),
            RewriteRule::from_text(
                "aggregate",
                "?r = \\sum(?a, ?l, ?u);",
                &[("r", IntVar), ("a", ArrayVar), ("l", IntAtom), ("u", IntAtom)],
                aggregate,
            ),
        ],
        invariant: inv("ag_lo == ag_hi || ag_sum == \\sum(ag_ar, ag_lo, ag_hi)"),
    }
}

/// Operators by command-line name. `forall` and `exists` take their
/// predicate from `pred`.
pub fn by_name(name: &str, pred: Option<&Lambda>) -> Option<InstrumentationOperator> {
    Some(match name {
        "square" => make_square(),
        "square_mutated" => make_square_mutated(),
        "max" => make_max(),
        "min" => make_min(),
        "sum" => make_sum(),
        "forall" => make_forall(pred?),
        "exists" => make_exists(pred?),
        _ => return None,
    })
}

/// The predicates of all quantifiers occurring in `p`, deduplicated up to
/// renaming of the parameters, in order of occurrence.
pub fn quantifier_predicates(p: &crate::lang::Program) -> Vec<(crate::lang::Quant, Lambda)> {
    let mut out: Vec<(crate::lang::Quant, Lambda)> = Vec::new();
    p.body.walk(&mut |s| {
        for e in s.exprs() {
            collect_quantifiers(e, &mut out);
        }
    });
    out
}

fn collect_quantifiers(e: &Expr, out: &mut Vec<(crate::lang::Quant, Lambda)>) {
    if let Expr::Quantified { kind, pred, .. } = e {
        if !out.iter().any(|(k, l)| k == kind && l.alpha_eq(pred)) {
            out.push((*kind, pred.clone()));
        }
    }
    for c in e.children() {
        collect_quantifiers(c, out);
    }
}

/// Operators suggested by the constructs of `p`: square when it multiplies
/// variables, one quantifier operator per predicate, and one aggregate
/// operator per aggregate kind.
pub fn default_operators(p: &crate::lang::Program) -> Vec<InstrumentationOperator> {
    use crate::lang::{BinOp, HomId, Quant};
    let mut square = false;
    let mut homs: Vec<&'static str> = Vec::new();
    p.body.walk(&mut |s| {
        for e in s.exprs() {
            scan(e, &mut square, &mut homs);
        }
    });
    fn scan(e: &Expr, square: &mut bool, homs: &mut Vec<&'static str>) {
        match e {
            Expr::Binary(BinOp::Mul, l, r) if l.as_int().is_none() && r.as_int().is_none() => *square = true,
            Expr::Aggregate { hom, .. } => {
                let n = match hom {
                    HomId::Sum => "sum",
                    HomId::Max => "max",
                    HomId::Min => "min",
                    HomId::Count(_) => "",
                };
                if !n.is_empty() && !homs.contains(&n) {
                    homs.push(n);
                }
            }
            _ => {}
        }
        for c in e.children() {
            scan(c, square, homs);
        }
    }
    let mut ops = Vec::new();
    if square {
        ops.push(make_square());
    }
    for (k, (kind, pred)) in quantifier_predicates(p).into_iter().enumerate() {
        let op = match kind {
            Quant::Forall => make_forall(&pred),
            Quant::Exists => make_exists(&pred),
        };
        ops.push(op.instance(k));
    }
    for h in homs {
        ops.push(by_name(h, None).expect("known aggregate operator"));
    }
    rename_shared_ghosts(ops)
}

/// Gives every operator in `ops` ghosts distinct from the earlier ones.
pub fn rename_shared_ghosts(ops: Vec<InstrumentationOperator>) -> Vec<InstrumentationOperator> {
    let mut out: Vec<InstrumentationOperator> = Vec::new();
    for op in ops {
        let mut k = 0;
        let mut cand = op.clone();
        while out
            .iter()
            .any(|o| o.ghosts.iter().any(|g| cand.is_ghost(&g.name)))
        {
            k += 1;
            cand = op.instance(k);
        }
        out.push(cand);
    }
    out
}
