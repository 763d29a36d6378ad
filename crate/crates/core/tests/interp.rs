mod common;

use ghostline::interp::{
    aggregate_value, enumerate_check, enumerate_check_fuel, replays, run, run_traced, ArrayValue, Bounds, ExecutionResult,
    State, Value,
};
use ghostline::lang::{load, HomId, Program};
use ghostline::oracle::Verdict;
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn program(src: &str) -> Program {
    load(src).unwrap().program
}

#[test]
fn triangular_terminates_with_the_closed_form() {
    let p = program(include_str!("../../../benchmarks/triangular.cw"));
    let init = State::new()
        .with("N", Value::int(4))
        .with("i", Value::int(0))
        .with("s", Value::int(0))
        .with("NN", Value::int(0));
    let ExecutionResult::Terminated(end) = run(&p, &init, 1000) else {
        panic!("should terminate")
    };
    assert_eq!(end.get("s"), Some(&Value::int(10)));
    assert_eq!(end.get("NN"), Some(&Value::int(16)));
}

#[test]
fn failed_assume_blocks_and_loops_run_out_of_fuel() {
    let p = program("Int n = nondet; assume(n > 0); while (n > 0) { n = n + 1; }");
    let init = |v| State::new().with("n", Value::int(v));
    assert!(matches!(run(&p, &init(0), 100), ExecutionResult::Blocked));
    assert!(matches!(run(&p, &init(1), 100), ExecutionResult::FuelExhausted));
}

#[test]
fn enumeration_finds_the_smallest_failure() {
    let p = program("Int n = nondet; Int i; while (i < n) { i = i + 1; } assert(i != 2);");
    let Verdict::Unsafe(cex) = enumerate_check(&p, &Bounds::ints(0, 4)) else {
        panic!("expected a failure")
    };
    assert_eq!(cex.initial.get("n"), Some(&Value::int(2)));
    assert!(replays(&p, &cex));
    assert!(matches!(enumerate_check(&p, &Bounds::ints(0, 1)), Verdict::Safe(_)));
}

#[test]
fn array_programs_are_enumerated_over_small_arrays() {
    let p = program("Array Int a = nondet; Int m; m = \\max(a, 0, 2); assert(m >= select(a, 1));");
    assert!(matches!(enumerate_check_fuel(&p, &common::small_bounds(), 100), Verdict::Safe(_)));
    let p = program("Array Int a = nondet; Int s; s = \\sum(a, 0, 2); assert(s != 5);");
    let Verdict::Unsafe(cex) = enumerate_check_fuel(&p, &common::small_bounds(), 100) else {
        panic!("two elements can sum to five")
    };
    assert!(replays(&p, &cex));
}

#[test]
fn runs_are_deterministic() {
    let mut rng = StdRng::seed_from_u64(9);
    let bounds = common::small_bounds();
    for _ in 0..30 {
        let (_, p) = common::random_program(&mut rng, 2);
        for s in ghostline::interp::initial_states(&p, &bounds).into_iter().take(50) {
            assert_eq!(run_traced(&p, &s, common::FUEL), run_traced(&p, &s, common::FUEL));
        }
    }
}

fn fold(hom: &HomId, xs: &[i64], l: usize, u: usize) -> Value {
    let slice = if l < u { &xs[l..u] } else { &[][..] };
    match hom {
        HomId::Sum => Value::int(slice.iter().sum()),
        HomId::Max => slice.iter().max().map_or(Value::NegInf, |v| Value::int(*v)),
        HomId::Min => slice.iter().min().map_or(Value::PosInf, |v| Value::int(*v)),
        HomId::Count(_) => unreachable!(),
    }
}

proptest! {
    #[test]
    fn aggregates_match_a_slice_fold(
        xs in prop::collection::vec(-20i64..20, 0..10),
        l in 0usize..10,
        len in 0usize..10,
        which in 0usize..3,
    ) {
        let hom = [HomId::Sum, HomId::Max, HomId::Min][which].clone();
        let u = (l + len).min(xs.len());
        let a = ArrayValue::from_slice(Value::int(0), &xs.iter().map(|v| Value::int(*v)).collect::<Vec<_>>());
        let got = aggregate_value(&hom, &a, &BigInt::from(l), &BigInt::from(u));
        prop_assert_eq!(got, fold(&hom, &xs, l.min(u), u));
    }
}
