//! Loop invariants certifying a program, and their translation from an
//! instrumented program back to the original one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::operator::InstrumentationOperator;
use crate::lang::{BinOp, ControlPoint, Expr, Type};

/// `exists bound. body`, where `body` is quantifier-free apart from the
/// array quantifiers and aggregates of the language.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Invariant {
    pub bound: Vec<(String, Type)>,
    pub body: Expr,
}

impl Invariant {
    pub fn plain(body: Expr) -> Invariant {
        Invariant {
            bound: vec![],
            body,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.bound.is_empty()
    }

    /// Variables occurring free, i.e. not bound by the existential prefix.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut fv = self.body.free_vars();
        for (v, _) in &self.bound {
            fv.remove(v);
        }
        fv
    }

    /// Removes bound variables defined by an equation `v == t` among the
    /// conjuncts, substituting `t` for `v` in the rest.
    pub fn eliminate(&self) -> Invariant {
        let mut bound = self.bound.clone();
        let mut conj = self.body.conjuncts();
        loop {
            let mut progress = false;
            'vars: for k in 0..bound.len() {
                let v = bound[k].0.clone();
                for (j, c) in conj.iter().enumerate() {
                    let Some(t) = definition_of(&v, c) else { continue };
                    let map = BTreeMap::from([(v.clone(), t)]);
                    let rest: Vec<Expr> = conj
                        .iter()
                        .enumerate()
                        .filter(|(m, _)| *m != j)
                        .map(|(_, e)| e.substitute(&map))
                        .collect();
                    conj = rest;
                    bound.remove(k);
                    progress = true;
                    break 'vars;
                }
            }
            if !progress {
                break;
            }
        }
        bound.retain(|(v, _)| conj.iter().any(|c| c.mentions(v)));
        Invariant {
            bound,
            body: Expr::conj(conj),
        }
    }
}

fn definition_of(v: &str, c: &Expr) -> Option<Expr> {
    let Expr::Binary(BinOp::Eq, l, r) = c else { return None };
    match (l.as_var(), r.as_var()) {
        (Some(x), _) if x == v && !r.mentions(v) => Some((**r).clone()),
        (_, Some(x)) if x == v && !l.mentions(v) => Some((**l).clone()),
        _ => None,
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bound.is_empty() {
            return write!(f, "{}", self.body);
        }
        let vars: Vec<String> = self.bound.iter().map(|(v, t)| format!("{t} {v}")).collect();
        write!(f, "exists {}. ({})", vars.join(", "), self.body)
    }
}

/// Inductive invariants at loop heads. `k` is the induction depth at which
/// they were established (1 for plain inductiveness).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Witness {
    pub invariants: BTreeMap<ControlPoint, Invariant>,
    pub k: u32,
}

impl Witness {
    pub fn to_json(&self) -> serde_json::Value {
        let inv: serde_json::Map<String, serde_json::Value> = self
            .invariants
            .iter()
            .map(|(p, i)| (p.to_string(), serde_json::Value::String(i.to_string())))
            .collect();
        serde_json::json!({ "k": self.k, "invariants": inv })
    }
}

/// Turns a witness for an instrumented program into one for the original:
/// every formula mentioning ghosts of an operator is conjoined with that
/// operator's invariant and the ghosts are existentially quantified.
/// Formulas without ghosts are kept as they are, since the closed formula
/// `exists ghosts. I` holds (I is true of the initial ghost values).
pub fn back_translate_witness(w: &Witness, ops: &[InstrumentationOperator]) -> Witness {
    let invariants = w
        .invariants
        .iter()
        .map(|(p, inv)| (*p, back_translate(inv, ops)))
        .collect();
    Witness {
        invariants,
        k: w.k,
    }
}

fn back_translate(inv: &Invariant, ops: &[InstrumentationOperator]) -> Invariant {
    let fv = inv.free_vars();
    let mut bound = inv.bound.clone();
    let mut conj = inv.body.conjuncts();
    for op in ops {
        if !op.ghosts.iter().any(|g| fv.contains(&g.name)) {
            continue;
        }
        for g in &op.ghosts {
            bound.push((g.name.clone(), g.ty.clone()));
        }
        conj.push(op.invariant.clone());
    }
    Invariant {
        bound,
        body: Expr::conj(conj),
    }
}
