use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Euclid, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;

use crate::lang::Type;

/// Runtime values. `NegInf`/`PosInf` are the neutral elements of max/min.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(BigInt),
    NegInf,
    PosInf,
    Bool(bool),
    Array(ArrayValue),
}

/// A total function from integers to values: a default plus finitely many
/// overrides. Overrides never repeat the default, so equality is structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArrayValue {
    default: Box<Value>,
    overrides: BTreeMap<BigInt, Value>,
}

impl ArrayValue {
    pub fn constant(default: Value) -> Self {
        ArrayValue {
            default: Box::new(default),
            overrides: BTreeMap::new(),
        }
    }

    pub fn from_parts(default: Value, overrides: impl IntoIterator<Item = (BigInt, Value)>) -> Self {
        let mut a = ArrayValue::constant(default);
        for (i, v) in overrides {
            a = a.store(&i, v);
        }
        a
    }

    /// Array holding `values[k]` at index `k`, default `default`.
    pub fn from_slice(default: Value, values: &[Value]) -> Self {
        ArrayValue::from_parts(
            default,
            values
                .iter()
                .enumerate()
                .map(|(k, v)| (BigInt::from(k), v.clone())),
        )
    }

    pub fn default_value(&self) -> &Value {
        &self.default
    }

    pub fn overrides(&self) -> &BTreeMap<BigInt, Value> {
        &self.overrides
    }

    pub fn select(&self, i: &BigInt) -> &Value {
        self.overrides.get(i).unwrap_or(&self.default)
    }

    pub fn store(&self, i: &BigInt, v: Value) -> ArrayValue {
        let mut out = self.clone();
        if v == *out.default {
            out.overrides.remove(i);
        } else {
            out.overrides.insert(i.clone(), v);
        }
        out
    }
}

impl Value {
    pub fn int(v: i64) -> Value {
        Value::Int(BigInt::from(v))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&ArrayValue> {
        match self {
            Value::Array(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_intlike(&self) -> bool {
        matches!(self, Value::Int(_) | Value::NegInf | Value::PosInf)
    }

    /// Default value of a type: 0, false, or the array that is everywhere default.
    pub fn default_of(ty: &Type) -> Value {
        match ty {
            Type::Int => Value::int(0),
            Type::Bool => Value::Bool(false),
            Type::Array(e) => Value::Array(ArrayValue::constant(Value::default_of(e))),
        }
    }

    /// Order on integers extended with the two sentinels.
    pub fn cmp_int(&self, other: &Value) -> Ordering {
        use Value::*;
        match (self, other) {
            (Int(a), Int(b)) => a.cmp(b),
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (PosInf, _) | (_, NegInf) => Ordering::Greater,
            _ => panic!("comparing non-integers {self} and {other}"),
        }
    }

    fn sign(&self) -> i8 {
        match self {
            Value::NegInf => -1,
            Value::PosInf => 1,
            Value::Int(v) if v.is_zero() => 0,
            Value::Int(v) if v.is_negative() => -1,
            _ => 1,
        }
    }

    fn inf_with_sign(s: i8) -> Value {
        match s.cmp(&0) {
            Ordering::Less => Value::NegInf,
            Ordering::Equal => Value::int(0),
            Ordering::Greater => Value::PosInf,
        }
    }

    /// Saturating addition; the two opposite sentinels cancel to 0.
    pub fn add(&self, other: &Value) -> Value {
        use Value::*;
        match (self, other) {
            (Int(a), Int(b)) => Int(a + b),
            (NegInf, PosInf) | (PosInf, NegInf) => Value::int(0),
            (NegInf, _) | (_, NegInf) => NegInf,
            _ => PosInf,
        }
    }

    pub fn neg(&self) -> Value {
        match self {
            Value::Int(a) => Value::Int(-a),
            Value::NegInf => Value::PosInf,
            Value::PosInf => Value::NegInf,
            v => panic!("negating {v}"),
        }
    }

    pub fn sub(&self, other: &Value) -> Value {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Value::Int(a * b),
            _ => Value::inf_with_sign(self.sign() * other.sign()),
        }
    }

    /// Euclidean division; division by zero yields 0.
    pub fn div(&self, other: &Value) -> Value {
        match (self, other) {
            (_, Value::Int(b)) if b.is_zero() => Value::int(0),
            (Value::Int(a), Value::Int(b)) => Value::Int(a.div_euclid(b)),
            (Value::Int(_), _) => Value::int(0),
            (_, Value::Int(_)) => Value::inf_with_sign(self.sign() * other.sign()),
            _ => Value::int(0),
        }
    }

    /// Euclidean remainder; `x % 0` is `x`, remainders involving sentinels are 0.
    pub fn rem(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) if b.is_zero() => Value::Int(a.clone()),
            (Value::Int(a), Value::Int(b)) => Value::Int(a.rem_euclid(b)),
            _ => Value::int(0),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Int(v) => match i64::try_from(v) {
                Ok(n) => json!(n),
                Err(_) => json!(v.to_string()),
            },
            Value::NegInf => json!("-inf"),
            Value::PosInf => json!("+inf"),
            Value::Bool(b) => json!(b),
            Value::Array(a) => json!({
                "default": a.default.to_json(),
                "overrides": a.overrides.iter()
                    .map(|(i, v)| json!([Value::Int(i.clone()).to_json(), v.to_json()]))
                    .collect::<Vec<_>>(),
            }),
        }
    }

    pub fn from_json(j: &serde_json::Value) -> Option<Value> {
        match j {
            serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
            serde_json::Value::Number(n) => n.as_i64().map(Value::int),
            serde_json::Value::String(s) => match s.as_str() {
                "-inf" => Some(Value::NegInf),
                "+inf" => Some(Value::PosInf),
                s => s.parse().ok().map(Value::Int),
            },
            serde_json::Value::Object(o) => {
                let default = Value::from_json(o.get("default")?)?;
                let mut overrides = Vec::new();
                for pair in o.get("overrides")?.as_array()? {
                    let pair = pair.as_array()?;
                    let i = match Value::from_json(pair.first()?)? {
                        Value::Int(i) => i,
                        _ => return None,
                    };
                    overrides.push((i, Value::from_json(pair.get(1)?)?));
                }
                Some(Value::Array(ArrayValue::from_parts(default, overrides)))
            }
            _ => None,
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = serde_json::Value::deserialize(d)?;
        Value::from_json(&j).ok_or_else(|| serde::de::Error::custom("malformed value"))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::NegInf => write!(f, "-inf"),
            Value::PosInf => write!(f, "+inf"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Array(a) => {
                write!(f, "[default {}", a.default)?;
                for (i, v) in &a.overrides {
                    write!(f, ", {i}: {v}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Program state: a valuation of variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(pub BTreeMap<String, Value>);

impl State {
    pub fn new() -> Self {
        State(BTreeMap::new())
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn set(&mut self, name: &str, v: Value) {
        self.0.insert(name.to_string(), v);
    }

    pub fn with(mut self, name: &str, v: Value) -> Self {
        self.set(name, v);
        self
    }

    /// Keeps only the listed variables.
    pub fn restrict<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> State {
        let mut out = State::new();
        for n in names {
            if let Some(v) = self.0.get(n) {
                out.set(n, v.clone());
            }
        }
        out
    }

    pub fn without<'a>(&self, names: impl IntoIterator<Item = &'a String>) -> State {
        let mut out = self.clone();
        for n in names {
            out.0.remove(n);
        }
        out
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_keeps_canonical_form() {
        let a = ArrayValue::constant(Value::int(0));
        let b = a.store(&BigInt::from(3), Value::int(5));
        let c = b.store(&BigInt::from(3), Value::int(0));
        assert_eq!(a, c);
        assert_eq!(b.select(&BigInt::from(3)), &Value::int(5));
    }

    #[test]
    fn sentinel_arithmetic_saturates() {
        assert_eq!(Value::NegInf.add(&Value::int(5)), Value::NegInf);
        assert_eq!(Value::NegInf.add(&Value::PosInf), Value::int(0));
        assert_eq!(Value::int(-2).mul(&Value::PosInf), Value::NegInf);
        assert_eq!(Value::int(0).mul(&Value::PosInf), Value::int(0));
        assert_eq!(Value::NegInf.cmp_int(&Value::int(-100)), Ordering::Less);
    }

    #[test]
    fn euclidean_division() {
        assert_eq!(Value::int(-7).div(&Value::int(2)), Value::int(-4));
        assert_eq!(Value::int(-7).rem(&Value::int(2)), Value::int(1));
        assert_eq!(Value::int(7).div(&Value::int(0)), Value::int(0));
    }

    #[test]
    fn json_round_trip() {
        let a = Value::Array(ArrayValue::from_slice(
            Value::int(0),
            &[Value::int(1), Value::NegInf],
        ));
        let s = State::new().with("a", a).with("b", Value::Bool(true));
        let text = serde_json::to_string(&s).unwrap();
        let back: State = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
