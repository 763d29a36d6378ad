use num_bigint::BigInt;

use super::homs::aggregate_with;
use super::value::{ArrayValue, State, Value};
use crate::lang::{BinOp, Expr, Lambda, Quant, UnOp};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("ill-typed operand in `{0}`")]
    Type(String),
}

type Locals = [(String, Value)];

fn lookup<'a>(name: &str, s: &'a State, locals: &'a Locals) -> Result<&'a Value, EvalError> {
    locals
        .iter()
        .rev()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v)
        .or_else(|| s.get(name))
        .ok_or_else(|| EvalError::Unbound(name.to_string()))
}

fn bad(e: &Expr) -> EvalError {
    EvalError::Type(e.to_string())
}

fn int_of(v: Value, e: &Expr) -> Result<BigInt, EvalError> {
    match v {
        Value::Int(i) => Ok(i),
        _ => Err(bad(e)),
    }
}

fn array_of(v: Value, e: &Expr) -> Result<ArrayValue, EvalError> {
    match v {
        Value::Array(a) => Ok(a),
        _ => Err(bad(e)),
    }
}

fn bool_of(v: Value, e: &Expr) -> Result<bool, EvalError> {
    v.as_bool().ok_or_else(|| bad(e))
}

/// Evaluates `lam(value, index)` in `s`.
pub fn apply_lambda(
    lam: &Lambda,
    value: &Value,
    index: &BigInt,
    s: &State,
    locals: &Locals,
) -> Result<bool, EvalError> {
    let mut inner = locals.to_vec();
    inner.push((lam.value_param.clone(), value.clone()));
    inner.push((lam.index_param.clone(), Value::Int(index.clone())));
    bool_of(eval_in(&lam.body, s, &inner)?, &lam.body)
}

/// Applies a closed predicate; ill-formed applications count as false.
pub fn apply_closed(lam: &Lambda, value: &Value, index: &BigInt) -> bool {
    apply_lambda(lam, value, index, &State::new(), &[]).unwrap_or(false)
}

pub fn eval(e: &Expr, s: &State) -> Result<Value, EvalError> {
    eval_in(e, s, &[])
}

pub fn eval_bool(e: &Expr, s: &State) -> Result<bool, EvalError> {
    bool_of(eval(e, s)?, e)
}

fn eval_in(e: &Expr, s: &State, locals: &Locals) -> Result<Value, EvalError> {
    let ev = |x: &Expr| eval_in(x, s, locals);
    Ok(match e {
        Expr::Int(v) => Value::Int(v.clone()),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::NegInf => Value::NegInf,
        Expr::PosInf => Value::PosInf,
        Expr::Var(v) => lookup(v, s, locals)?.clone(),
        Expr::Unary(UnOp::Not, x) => Value::Bool(!bool_of(ev(x)?, e)?),
        Expr::Unary(UnOp::Neg, x) => {
            let v = ev(x)?;
            if !v.is_intlike() {
                return Err(bad(e));
            }
            v.neg()
        }
        Expr::Binary(op, l, r) => match op {
            BinOp::And => Value::Bool(bool_of(ev(l)?, e)? && bool_of(ev(r)?, e)?),
            BinOp::Or => Value::Bool(bool_of(ev(l)?, e)? || bool_of(ev(r)?, e)?),
            BinOp::Eq => Value::Bool(ev(l)? == ev(r)?),
            BinOp::Ne => Value::Bool(ev(l)? != ev(r)?),
            _ => {
                let (a, b) = (ev(l)?, ev(r)?);
                if !a.is_intlike() || !b.is_intlike() {
                    return Err(bad(e));
                }
                use std::cmp::Ordering::*;
                match op {
                    BinOp::Lt => Value::Bool(a.cmp_int(&b) == Less),
                    BinOp::Le => Value::Bool(a.cmp_int(&b) != Greater),
                    BinOp::Gt => Value::Bool(a.cmp_int(&b) == Greater),
                    BinOp::Ge => Value::Bool(a.cmp_int(&b) != Less),
                    BinOp::Add => a.add(&b),
                    BinOp::Sub => a.sub(&b),
                    BinOp::Mul => a.mul(&b),
                    BinOp::Div => a.div(&b),
                    BinOp::Mod => a.rem(&b),
                    _ => unreachable!(),
                }
            }
        },
        Expr::Select(a, i) => {
            let a = array_of(ev(a)?, e)?;
            let i = int_of(ev(i)?, e)?;
            a.select(&i).clone()
        }
        Expr::Store(a, i, v) => {
            let a = array_of(ev(a)?, e)?;
            let i = int_of(ev(i)?, e)?;
            Value::Array(a.store(&i, ev(v)?))
        }
        Expr::ConstArray(v, _) => Value::Array(ArrayValue::constant(ev(v)?)),
        Expr::Quantified {
            kind,
            array,
            lo,
            hi,
            pred,
        } => {
            let a = array_of(ev(array)?, e)?;
            let l = int_of(ev(lo)?, e)?;
            let u = int_of(ev(hi)?, e)?;
            let want = *kind == Quant::Exists;
            let mut i = l;
            while i < u {
                if apply_lambda(pred, a.select(&i), &i, s, locals)? == want {
                    return Ok(Value::Bool(want));
                }
                i += 1;
            }
            Value::Bool(!want)
        }
        Expr::Aggregate { hom, array, lo, hi } => {
            let a = array_of(ev(array)?, e)?;
            let l = int_of(ev(lo)?, e)?;
            let u = int_of(ev(hi)?, e)?;
            let mut err = None;
            let mut pred = |v: &Value, i: &BigInt| match hom {
                crate::lang::HomId::Count(lam) => match apply_lambda(lam, v, i, s, locals) {
                    Ok(b) => b,
                    Err(x) => {
                        err = Some(x);
                        false
                    }
                },
                _ => false,
            };
            let r = aggregate_with(hom, &a, &l, &u, &mut pred);
            if let Some(x) = err {
                return Err(x);
            }
            r
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_expr;

    fn st() -> State {
        State::new()
            .with(
                "a",
                Value::Array(ArrayValue::from_slice(
                    Value::int(0),
                    &[Value::int(1), Value::int(2), Value::int(4)],
                )),
            )
            .with("i", Value::int(1))
    }

    fn ev(src: &str) -> Value {
        eval(&parse_expr(src).unwrap(), &st()).unwrap()
    }

    #[test]
    fn select_over_store() {
        assert_eq!(ev("select(store(a, 0, 5), 0)"), Value::int(5));
        assert_eq!(ev("a[i]"), Value::int(2));
    }

    #[test]
    fn quantifiers() {
        assert_eq!(ev("forall(a, 3, 3, lambda(x, k). false)"), Value::Bool(true));
        assert_eq!(ev("exists(a, 3, 3, lambda(x, k). true)"), Value::Bool(false));
        assert_eq!(ev("forall(a, 0, 3, lambda(x, k). x > k)"), Value::Bool(true));
        assert_eq!(ev("exists(a, 0, 3, lambda(x, k). x == i + 3)"), Value::Bool(true));
    }

    #[test]
    fn aggregates() {
        assert_eq!(ev("\\sum(a, 0, 3)"), Value::int(7));
        assert_eq!(ev("\\count(a, 0, 5, lambda(x, k). x > i)"), Value::int(2));
        assert_eq!(ev("\\max(a, 2, 1)"), Value::NegInf);
    }

    #[test]
    fn unbound_variable_is_reported() {
        let e = parse_expr("zz + 1").unwrap();
        assert_eq!(eval(&e, &st()), Err(EvalError::Unbound("zz".into())));
    }
}
