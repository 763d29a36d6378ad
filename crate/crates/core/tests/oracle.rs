use ghostline::instrument::{Invariant, Witness};
use ghostline::interp::replays;
use ghostline::lang::{load, parse_expr, Program};
use ghostline::oracle::encode::HavocPolicy;
use ghostline::oracle::{is_correct, validate_witness, OracleConfig, SolverConfig, Verdict};

fn program(src: &str) -> Program {
    load(src).unwrap().program
}

fn verdict(src: &str) -> (Program, Verdict) {
    let p = program(src);
    let v = is_correct(&p, &OracleConfig::default());
    (p, v)
}

#[test]
fn linear_loop_is_safe_with_a_valid_witness() {
    let (p, v) = verdict("Int N = nondet; Int i; Int s; assume(N >= 0); while (i < N) { i = i + 1; s = s + 3; } assert(s == 3 * N);");
    let Verdict::Safe(w) = v else { panic!("{v:?}") };
    let check = validate_witness(&p, &w, &SolverConfig::default(), HavocPolicy::default()).unwrap();
    assert!(check.valid(), "{check:?}");
}

#[test]
fn unsafe_programs_come_with_replayable_counterexamples() {
    let (p, v) = verdict("Int N = nondet; Int i; while (i < N) { i = i + 2; } assert(i == N);");
    let Verdict::Unsafe(cex) = v else { panic!("{v:?}") };
    assert!(replays(&p, &cex));
}

#[test]
fn square_of_the_counter_is_out_of_reach() {
    // Without ghost code the nonlinear postcondition is havocked, so the
    // oracle cannot prove it; it must not claim a failure either.
    let (_, v) = verdict(include_str!("../../../benchmarks/triangular.cw"));
    assert!(matches!(v, Verdict::Unknown(_)), "{v:?}");
}

#[test]
fn loop_free_programs_are_decided() {
    let (_, v) = verdict("Int x = nondet; Int y; y = x + 1; assert(y > x);");
    assert!(matches!(v, Verdict::Safe(_)), "{v:?}");
    let (p, v) = verdict("Int x = nondet; assume(x > 5); assert(x < 7);");
    let Verdict::Unsafe(cex) = v else { panic!("{v:?}") };
    assert!(replays(&p, &cex));
}

#[test]
fn wrong_invariants_are_rejected() {
    let p = program("Int N = nondet; Int i; while (i < N) { i = i + 1; } assert(i >= 0);");
    let head = p.loop_heads()[0];
    let witness = |src: &str| Witness {
        invariants: [(head, Invariant::plain(parse_expr(src).unwrap()))].into(),
        k: 1,
    };
    let solver = SolverConfig::default();
    let good = validate_witness(&p, &witness("i >= 0"), &solver, HavocPolicy::exact()).unwrap();
    assert!(good.valid(), "{good:?}");
    let weak = validate_witness(&p, &witness("true"), &solver, HavocPolicy::exact()).unwrap();
    assert_eq!((weak.inductive, weak.safe), (Some(true), Some(false)));
    let wrong = validate_witness(&p, &witness("i == 0"), &solver, HavocPolicy::exact()).unwrap();
    assert_eq!(wrong.inductive, Some(false));
}
