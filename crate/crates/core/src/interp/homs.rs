//! Registry of monoid homomorphisms usable in aggregates.

use std::cmp::Ordering;

use num_bigint::BigInt;

use super::value::{ArrayValue, Value};
use crate::lang::HomId;

/// Carrier operation and neutral element of a monoid over integer-like values.
#[derive(Clone, Copy)]
pub struct Monoid {
    pub neutral: fn() -> Value,
    pub combine: fn(&Value, &Value) -> Value,
}

fn max(a: &Value, b: &Value) -> Value {
    if a.cmp_int(b) == Ordering::Less {
        b.clone()
    } else {
        a.clone()
    }
}

fn min(a: &Value, b: &Value) -> Value {
    if b.cmp_int(a) == Ordering::Less {
        b.clone()
    } else {
        a.clone()
    }
}

fn add(a: &Value, b: &Value) -> Value {
    a.add(b)
}

/// The target monoid of a homomorphism.
pub fn monoid(hom: &HomId) -> Monoid {
    match hom {
        HomId::Sum | HomId::Count(_) => Monoid {
            neutral: || Value::int(0),
            combine: add,
        },
        HomId::Max => Monoid {
            neutral: || Value::NegInf,
            combine: max,
        },
        HomId::Min => Monoid {
            neutral: || Value::PosInf,
            combine: min,
        },
    }
}

/// Image of a single element. `pred` decides membership for `\count`.
pub fn element_image(
    hom: &HomId,
    value: &Value,
    index: &BigInt,
    pred: &mut dyn FnMut(&Value, &BigInt) -> bool,
) -> Value {
    match hom {
        HomId::Count(_) => Value::int(i64::from(pred(value, index))),
        _ => value.clone(),
    }
}

/// `h(<a[l], ..., a[u-1]>)`; the neutral element when `u <= l`.
///
/// `pred` evaluates the counting predicate; it is unused by the other
/// homomorphisms.
pub fn aggregate_with(
    hom: &HomId,
    a: &ArrayValue,
    l: &BigInt,
    u: &BigInt,
    pred: &mut dyn FnMut(&Value, &BigInt) -> bool,
) -> Value {
    let m = monoid(hom);
    let mut acc = (m.neutral)();
    let mut i = l.clone();
    while &i < u {
        let img = element_image(hom, a.select(&i), &i, pred);
        acc = (m.combine)(&acc, &img);
        i += 1;
    }
    acc
}

/// Aggregate of a slice. The `\count` predicate must be closed.
pub fn aggregate_value(hom: &HomId, a: &ArrayValue, l: &BigInt, u: &BigInt) -> Value {
    let mut pred = |v: &Value, i: &BigInt| match hom {
        HomId::Count(lam) => super::eval::apply_closed(lam, v, i),
        _ => false,
    };
    aggregate_with(hom, a, l, u, &mut pred)
}

/// Homomorphism applied to a plain sequence (used to state the split law).
pub fn apply_to_sequence(hom: &HomId, seq: &[Value]) -> Value {
    let a = ArrayValue::from_slice(Value::int(0), seq);
    aggregate_value(hom, &a, &BigInt::from(0), &BigInt::from(seq.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(xs: &[i64]) -> ArrayValue {
        ArrayValue::from_slice(
            Value::int(0),
            &xs.iter().map(|&x| Value::int(x)).collect::<Vec<_>>(),
        )
    }

    fn b(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn empty_interval_is_neutral() {
        let a = arr(&[1, 2, 3]);
        assert_eq!(aggregate_value(&HomId::Sum, &a, &b(5), &b(3)), Value::int(0));
        assert_eq!(aggregate_value(&HomId::Max, &a, &b(2), &b(2)), Value::NegInf);
        assert_eq!(aggregate_value(&HomId::Min, &a, &b(2), &b(1)), Value::PosInf);
    }

    #[test]
    fn folds_over_slices() {
        let a = arr(&[1, 2, 4]);
        assert_eq!(aggregate_value(&HomId::Sum, &a, &b(0), &b(3)), Value::int(7));
        let a = arr(&[3, 1, 2]);
        assert_eq!(aggregate_value(&HomId::Max, &a, &b(0), &b(3)), Value::int(3));
        assert_eq!(aggregate_value(&HomId::Min, &a, &b(0), &b(3)), Value::int(1));
    }
}
