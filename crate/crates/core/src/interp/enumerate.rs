//! Brute-force checking over finite input domains.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use super::exec::{run, ExecutionResult, DEFAULT_FUEL};
use super::value::{ArrayValue, State, Value};
use crate::instrument::Witness;
use crate::lang::{Program, Type};
use crate::oracle::Verdict;

/// Arrays with a default from `defaults` and at most `max_overrides`
/// overridden cells inside `indices`, each holding a value from `elems`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayDomain {
    pub defaults: Vec<Value>,
    pub indices: (i64, i64),
    pub elems: Vec<Value>,
    pub max_overrides: usize,
}

impl ArrayDomain {
    pub fn values(&self) -> Vec<Value> {
        let idx: Vec<i64> = (self.indices.0..=self.indices.1).collect();
        let mut out = Vec::new();
        for d in &self.defaults {
            let elems: Vec<&Value> = self.elems.iter().filter(|e| *e != d).collect();
            let mut chosen: Vec<(i64, Value)> = Vec::new();
            fill(&idx, 0, &elems, self.max_overrides, d, &mut chosen, &mut out);
        }
        out
    }
}

fn fill(
    idx: &[i64],
    from: usize,
    elems: &[&Value],
    budget: usize,
    default: &Value,
    chosen: &mut Vec<(i64, Value)>,
    out: &mut Vec<Value>,
) {
    out.push(Value::Array(ArrayValue::from_parts(
        default.clone(),
        chosen.iter().map(|(i, v)| (BigInt::from(*i), v.clone())),
    )));
    if budget == 0 {
        return;
    }
    for k in from..idx.len() {
        for e in elems {
            chosen.push((idx[k], (*e).clone()));
            fill(idx, k + 1, elems, budget - 1, default, chosen, out);
            chosen.pop();
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Ints(i64, i64),
    Bools,
    Arrays(ArrayDomain),
    Values(Vec<Value>),
}

impl Domain {
    pub fn values(&self) -> Vec<Value> {
        match self {
            Domain::Ints(lo, hi) => (*lo..=*hi).map(Value::int).collect(),
            Domain::Bools => vec![Value::Bool(false), Value::Bool(true)],
            Domain::Arrays(a) => a.values(),
            Domain::Values(v) => v.clone(),
        }
    }
}

/// Input domains: per-variable overrides, otherwise a per-type default.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub int: Domain,
    pub array: ArrayDomain,
    pub vars: BTreeMap<String, Domain>,
}

impl Bounds {
    /// Integers in `[lo, hi]`; integer arrays default 0 with up to two
    /// overrides at indices 0..=2 drawn from the same range.
    pub fn ints(lo: i64, hi: i64) -> Bounds {
        Bounds {
            int: Domain::Ints(lo, hi),
            array: ArrayDomain {
                defaults: vec![Value::int(0)],
                indices: (0, 2),
                elems: (lo..=hi).map(Value::int).collect(),
                max_overrides: 2,
            },
            vars: BTreeMap::new(),
        }
    }

    pub fn with_var(mut self, name: &str, d: Domain) -> Bounds {
        self.vars.insert(name.to_string(), d);
        self
    }

    pub fn domain(&self, name: &str, ty: &Type) -> Domain {
        if let Some(d) = self.vars.get(name) {
            return d.clone();
        }
        match ty {
            Type::Int => self.int.clone(),
            Type::Bool => Domain::Bools,
            Type::Array(e) if **e == Type::Int => Domain::Arrays(self.array.clone()),
            Type::Array(e) => {
                let elems = self.domain("", e).values();
                Domain::Arrays(ArrayDomain {
                    defaults: vec![Value::default_of(e)],
                    indices: self.array.indices,
                    elems,
                    max_overrides: self.array.max_overrides.min(1),
                })
            }
        }
    }
}

/// Initial state with every declared variable at its type's default.
pub fn default_state(p: &Program) -> State {
    let mut s = State::new();
    for d in &p.decls {
        s.set(&d.name, Value::default_of(&d.ty));
    }
    s
}

/// All initial states: input variables range over their domains in
/// ascending lexicographic order (declaration order), the rest are defaults.
pub fn initial_states(p: &Program, bounds: &Bounds) -> Vec<State> {
    let inputs: Vec<(&str, Vec<Value>)> = p
        .inputs()
        .map(|d| (d.name.as_str(), bounds.domain(&d.name, &d.ty).values()))
        .collect();
    let base = default_state(p);
    if inputs.iter().any(|(_, v)| v.is_empty()) {
        return vec![];
    }
    let mut out = Vec::new();
    let mut odo = vec![0usize; inputs.len()];
    loop {
        let mut s = base.clone();
        for (k, (name, vals)) in inputs.iter().enumerate() {
            s.set(name, vals[odo[k]].clone());
        }
        out.push(s);
        let mut k = inputs.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            odo[k] += 1;
            if odo[k] < inputs[k].1.len() {
                break;
            }
            odo[k] = 0;
        }
    }
}

/// Runs `p` on every initial state in `bounds`.
pub fn enumerate_check(p: &Program, bounds: &Bounds) -> Verdict {
    enumerate_check_fuel(p, bounds, DEFAULT_FUEL)
}

pub fn enumerate_check_fuel(p: &Program, bounds: &Bounds, fuel: u64) -> Verdict {
    let mut exhausted = false;
    for s in initial_states(p, bounds) {
        match run(p, &s, fuel) {
            ExecutionResult::Failed(c) => return Verdict::Unsafe(c),
            ExecutionResult::FuelExhausted => exhausted = true,
            ExecutionResult::Stuck(e) => return Verdict::Unknown(format!("stuck: {e}")),
            _ => {}
        }
    }
    if exhausted {
        Verdict::Unknown("fuel exhausted on some input".into())
    } else {
        Verdict::Safe(Witness::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    const TRIANGULAR: &str = "Int N = nondet; Int i; Int s; Int NN;\n\
        i = 0; s = 0; assume(N > 0);\n\
        while (i < N) { i = i + 1; s = s + i; }\n\
        NN = N * N; assert(s == (NN + N) / 2);";

    #[test]
    fn triangular_is_safe_on_small_inputs() {
        let p = parse(TRIANGULAR).unwrap();
        let v = enumerate_check(&p, &Bounds::ints(1, 5));
        assert!(matches!(v, Verdict::Safe(_)));
    }

    #[test]
    fn wrong_postcondition_fails_at_two() {
        let p = parse(&TRIANGULAR.replace("s == (NN + N) / 2", "s == NN")).unwrap();
        match enumerate_check(&p, &Bounds::ints(1, 3)) {
            Verdict::Unsafe(c) => {
                assert_eq!(c.initial.get("N"), Some(&Value::int(2)));
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn empty_domain_is_vacuously_safe() {
        let p = parse("Int N = nondet; assert(false);").unwrap();
        let b = Bounds::ints(0, 0).with_var("N", Domain::Values(vec![]));
        assert!(matches!(enumerate_check(&p, &b), Verdict::Safe(_)));
    }

    #[test]
    fn array_domain_counts() {
        let d = ArrayDomain {
            defaults: vec![Value::int(0)],
            indices: (0, 1),
            elems: vec![Value::int(0), Value::int(1)],
            max_overrides: 2,
        };
        // {}, {0:1}, {1:1}, {0:1, 1:1}
        assert_eq!(d.values().len(), 4);
    }
}
