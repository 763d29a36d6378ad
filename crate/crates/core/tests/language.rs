mod common;

use ghostline::lang::{is_normal, load, normalize, parse, print, typecheck, FrontendError, StmtKind};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

const TRIANGULAR: &str = include_str!("../../../benchmarks/triangular.cw");

#[test]
fn markers_name_the_rewritable_statements() {
    let p = load(TRIANGULAR).unwrap().program;
    for (m, text) in [("A", "i = 0;"), ("B", "s = 0;"), ("C", "i = i + 1;"), ("D", "NN = N * N;")] {
        let s = p.find_marker(m).unwrap_or_else(|| panic!("marker {m}"));
        assert_eq!(ghostline::lang::print_stmt(s).trim(), format!("{text} /*{m}*/"));
    }
    assert_eq!(p.loop_heads().len(), 1);
    assert!(p.decl("N").unwrap().input);
}

#[test]
fn missing_right_hand_side_is_located() {
    let Err(FrontendError::Parse(e)) = load("Int x;\nx = ;") else {
        panic!("expected a parse error")
    };
    assert_eq!((e.line, e.col), (2, 5));
    assert!(e.to_string().contains("expression"), "{e}");
}

#[test]
fn type_errors_are_all_reported() {
    let Err(FrontendError::Type(errs)) = load("Int x; Bool b; Array Int a; x = b + 1; a = store(a, b, 2); b = x;") else {
        panic!("expected type errors")
    };
    assert_eq!(errs.len(), 3, "{errs:?}");
}

#[test]
fn undeclared_variables_are_rejected() {
    assert!(matches!(load("y = 1;"), Err(FrontendError::Type(_))));
}

#[test]
fn quantifiers_are_hoisted_into_their_own_assignment() {
    let p = load("Array Int a; Int n; Bool b; b = n > 0 && forall(a, 0, n, λ(x, i).(x >= 0));").unwrap().program;
    let mut quantified = 0;
    p.body.walk(&mut |s| {
        if let StmtKind::Assign { value, .. } = &s.kind {
            if matches!(value, ghostline::lang::Expr::Quantified { .. }) {
                quantified += 1;
            }
        }
    });
    assert_eq!(quantified, 1, "{}", print(&p));
    assert!(is_normal(&p.body));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printing_round_trips_and_normalizing_is_idempotent(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (_, p) = common::random_program(&mut rng, 2);
        prop_assert!(is_normal(&p.body));
        let text = print(&p);
        let again = normalize(typecheck(parse(&text).unwrap()).unwrap());
        prop_assert_eq!(print(&again.program), text);
        let twice = normalize(again.clone());
        prop_assert_eq!(twice, again);
    }
}
