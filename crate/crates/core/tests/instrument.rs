mod common;

use ghostline::instrument::{
    applicable_points, apply_selection, back_translate_witness, project_counterexample, space_size, Invariant,
    ProjectError, Selection, SelectionError, Witness,
};
use ghostline::interp::{enumerate_check, enumerate_check_fuel, replays, run, Bounds, ExecutionResult, State, Value};
use ghostline::lang::{load, parse, parse_expr, print, ControlPoint, Program};
use ghostline::opslib::{default_operators, make_forall, make_square, quantifier_predicates};
use ghostline::oracle::Verdict;
use rand::rngs::StdRng;
use rand::SeedableRng;

const TRIANGULAR: &str = include_str!("../../../benchmarks/triangular.cw");
const FORALL_INIT: &str = include_str!("../../../benchmarks/forall_init.cw");

fn program(src: &str) -> Program {
    load(src).unwrap().program
}

fn point(p: &Program, marker: &str) -> ControlPoint {
    p.find_marker(marker).unwrap().label
}

/// Printed form with markers dropped, for structural comparison.
fn shape(p: &Program) -> String {
    let mut p = p.clone();
    p.body.walk_mut(&mut |s| s.marker = None);
    print(&p)
}

fn wrong_triangular() -> Program {
    program(&TRIANGULAR.replace("assert(s == (NN + N) / 2);", "assert(s == NN);"))
}

#[test]
fn triangular_menus() {
    let p = program(TRIANGULAR);
    let q = applicable_points(&p, &[make_square()]);
    let menu = |m| q.get(&point(&p, m)).cloned().unwrap_or_default();
    assert_eq!(menu("A"), vec!["square.R1"]);
    assert_eq!(menu("B"), vec!["square.R1"]);
    assert_eq!(menu("C"), vec!["square.R2"]);
    assert_eq!(menu("D"), vec!["square.R4"]);
    assert_eq!(q.len(), 4);
    assert_eq!(space_size(&q), 16);
}

#[test]
fn program_without_assignments_has_no_points() {
    let p = program("Int n = nondet; assert(n == n);");
    assert!(applicable_points(&p, &[make_square()]).is_empty());
}

#[test]
fn increment_matches_only_the_increment_rule() {
    let p = program("Int i = nondet; i = i + 1;");
    let q = applicable_points(&p, &[make_square()]);
    assert_eq!(q.values().next().unwrap(), &vec!["square.R2".to_string()]);
}

#[test]
fn triangular_instrumentation_matches_the_golden_listing() {
    let p = program(TRIANGULAR);
    let ops = [make_square()];
    let q = applicable_points(&p, &ops);
    let r = Selection::none(&q)
        .with(point(&p, "C"), "square.R2")
        .with(point(&p, "D"), "square.R4");
    let inst = apply_selection(&p, &ops, &r).unwrap();
    let golden = parse(include_str!("golden/triangular_instrumented.cw")).unwrap();
    assert_eq!(shape(&inst.program), shape(&golden));
}

#[test]
fn forall_instrumentation_matches_the_golden_listing() {
    let p = program(FORALL_INIT);
    let (_, pred) = quantifier_predicates(&p).remove(0);
    let ops = [make_forall(&pred)];
    let q = applicable_points(&p, &ops);
    let mut r = Selection::none(&q);
    for (pt, rules) in &q {
        r = r.with(*pt, &rules[0]);
    }
    assert_eq!(r.non_bottom(), 2);
    let inst = apply_selection(&p, &ops, &r).unwrap();
    let golden = parse(include_str!("golden/forall_init_instrumented.cw")).unwrap();
    assert_eq!(shape(&inst.program), shape(&golden));
}

#[test]
fn bottom_selection_only_adds_ghost_initialisation() {
    let p = program(TRIANGULAR);
    let ops = [make_square()];
    let inst = apply_selection(&p, &ops, &Selection::none(&applicable_points(&p, &ops))).unwrap();
    let printed = shape(&inst.program);
    let original = shape(&p);
    let body = original.split_once("Int NN;\n").unwrap().1;
    assert!(printed.ends_with(body), "{printed}");
    assert!(printed.contains("x_sq = 0;\nx_shad = 0;\n"));
}

#[test]
fn selections_are_validated() {
    let p = program(TRIANGULAR);
    let ops = [make_square()];
    let q = applicable_points(&p, &ops);
    let bad = Selection::none(&q).with(point(&p, "C"), "square.R4");
    assert!(matches!(apply_selection(&p, &ops, &bad), Err(SelectionError::NotApplicable { .. })));
    let clash = program("Int x_sq = nondet; x_sq = 1;");
    let q = applicable_points(&clash, &ops);
    assert!(matches!(
        apply_selection(&clash, &ops, &Selection::none(&q)),
        Err(SelectionError::GhostClash(_))
    ));
}

#[test]
fn wrong_postcondition_projects_to_a_failing_original_run() {
    let p = wrong_triangular();
    let ops = [make_square()];
    let q = applicable_points(&p, &ops);
    let r = Selection::none(&q)
        .with(point(&p, "C"), "square.R2")
        .with(point(&p, "D"), "square.R4");
    let inst = apply_selection(&p, &ops, &r).unwrap();
    let init = State::new().with("N", Value::int(2)).with("i", Value::int(0)).with("s", Value::int(0)).with("NN", Value::int(0));
    let mut init_r = init.clone();
    init_r.set("x_sq", Value::int(0));
    init_r.set("x_shad", Value::int(0));
    let ExecutionResult::Failed(cex) = run(&inst.program, &init_r, 100) else {
        panic!("instrumented program should fail at N = 2");
    };
    assert!(inst.is_original(cex.failing));
    let proj = project_counterexample(&cex, &inst).unwrap();
    assert_eq!(proj.initial, init);
    assert!(replays(&p, &proj));
    let Verdict::Unsafe(direct) = enumerate_check(&p, &Bounds::ints(1, 3)) else {
        panic!("enumeration should find the failure");
    };
    assert_eq!(direct.initial.get("N"), Some(&Value::int(2)));
}

#[test]
fn inserted_assertion_failures_do_not_project() {
    // Rewriting D alone leaves the shadow variable at 0, so the inserted
    // assertion `N == x_shad` fails.
    let p = program(TRIANGULAR);
    let ops = [make_square()];
    let r = Selection::none(&applicable_points(&p, &ops)).with(point(&p, "D"), "square.R4");
    let inst = apply_selection(&p, &ops, &r).unwrap();
    let init = State::new()
        .with("N", Value::int(1))
        .with("i", Value::int(0))
        .with("s", Value::int(0))
        .with("NN", Value::int(0))
        .with("x_sq", Value::int(0))
        .with("x_shad", Value::int(0));
    let ExecutionResult::Failed(cex) = run(&inst.program, &init, 100) else {
        panic!("inserted assertion should fail");
    };
    assert_eq!(project_counterexample(&cex, &inst), Err(ProjectError::NotOriginalAssert(cex.failing)));
}

#[test]
fn assert_false_projects_to_itself() {
    let p = program("assert(false);");
    let ops = [make_square()];
    let inst = apply_selection(&p, &ops, &Selection::default()).unwrap();
    let init = State::new().with("x_sq", Value::int(0)).with("x_shad", Value::int(0));
    let ExecutionResult::Failed(cex) = run(&inst.program, &init, 10) else {
        panic!()
    };
    let proj = project_counterexample(&cex, &inst).unwrap();
    assert_eq!(proj.len(), 1);
    assert!(replays(&p, &proj));
}

fn plain(src: &str) -> Witness {
    Witness {
        invariants: [(ControlPoint(4), Invariant::plain(parse_expr(src).unwrap()))].into(),
        k: 1,
    }
}

#[test]
fn back_translation_quantifies_ghosts_and_adds_the_invariant() {
    let w = plain("i == x_shad && x_sq + x_shad == 2 * s && N >= i && N >= 1 && 2 * s >= i && i >= 0");
    let b = back_translate_witness(&w, &[make_square()]);
    assert_eq!(
        b.invariants[&ControlPoint(4)].to_string(),
        "exists Int x_sq, Int x_shad. (i == x_shad && x_sq + x_shad == 2 * s && N >= i && N >= 1 && 2 * s >= i && i >= 0 && x_sq == x_shad * x_shad)"
    );
}

#[test]
fn ghost_free_formulas_are_kept() {
    for src in ["true", "i >= 0"] {
        let b = back_translate_witness(&plain(src), &[make_square()]);
        assert_eq!(b.invariants[&ControlPoint(4)].to_string(), src);
    }
}

#[test]
fn random_instrumentations_preserve_behaviour() {
    let mut rng = StdRng::seed_from_u64(11);
    let bounds = common::small_bounds();
    let mut checked = 0;
    for _ in 0..40 {
        let (src, p) = common::random_program(&mut rng, 2);
        let ops = default_operators(&p);
        let r = common::random_selection(&mut rng, &p, &ops);
        checked += common::check_instrumentation(&p, &ops, &r, &bounds).unwrap_or_else(|e| panic!("{e}\n{src}"));
    }
    assert!(checked > 0);
}

#[test]
fn generated_programs_exercise_rewrites_and_failures() {
    let mut rng = StdRng::seed_from_u64(5);
    let bounds = common::small_bounds();
    let (mut rewritten, mut failing, mut safe) = (0, 0, 0);
    for _ in 0..60 {
        let (_, p) = common::random_program(&mut rng, 3);
        let ops = default_operators(&p);
        if common::random_selection(&mut rng, &p, &ops).non_bottom() > 0 {
            rewritten += 1;
        }
        match enumerate_check_fuel(&p, &bounds, common::FUEL) {
            Verdict::Unsafe(_) => failing += 1,
            Verdict::Safe(_) => safe += 1,
            Verdict::Unknown(_) => {}
        }
    }
    eprintln!("rewritten {rewritten}, failing {failing}, safe {safe}");
    assert!(rewritten >= 30 && failing >= 10 && safe >= 5);
}

#[test]
fn broken_invariant_is_detected_on_random_programs() {
    let mut rng = StdRng::seed_from_u64(3);
    let bounds = common::small_bounds();
    let ops = [ghostline::opslib::make_square_mutated()];
    let mut caught = false;
    for _ in 0..60 {
        let (_, p) = common::random_program(&mut rng, 1);
        let r = common::random_selection(&mut rng, &p, &ops);
        if common::check_instrumentation(&p, &ops, &r, &bounds).is_err() {
            caught = true;
            break;
        }
    }
    assert!(caught);
}
