#![allow(clippy::needless_range_loop)]

mod common;

use common::corpus::{check_jet_corpus, check_parser_corpus, jet_corpus, parser_corpus};
use cqm_core::expr::{parse, BinOp, Expr, UnaryOp};
use cqm_core::jet::{EvalPoint, Jet};
use proptest::prelude::*;

#[test]
fn parser_corpus_round_trips_and_matches_oracle() {
    assert_eq!(parser_corpus().len(), 50);
    let out = check_parser_corpus();
    assert!(out.round_trip_failures.is_empty(), "{:?}", out.round_trip_failures);
    assert!(out.max_rel_error <= 1e-15, "max relative error {:e}", out.max_rel_error);
}

#[test]
fn jet_corpus_converges_at_second_order() {
    assert_eq!(jet_corpus().len(), 20);
    let out = check_jet_corpus();
    assert_eq!(out.comparisons, 20 * 4 * 35);
    assert!(out.min_ratio >= 3.5, "ratio {} at {}", out.min_ratio, out.worst);
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![(0u32..1000).prop_map(|n| Expr::num(n as f64 / 8.0)), (0u8..4).prop_map(Expr::var), prop_oneof![Just("a"), Just("c")].prop_map(Expr::constant),]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)])
                .prop_map(|(a, b, op)| Expr::bin(op, a, b)),
            (inner.clone(), prop_oneof![Just(UnaryOp::Neg), Just(UnaryOp::Sin), Just(UnaryOp::Exp), Just(UnaryOp::Sqrt)]).prop_map(|(a, op)| Expr::un(op, a)),
            (inner, -3i32..5).prop_map(|(a, n)| Expr::powi(a, n)),
        ]
    })
}

proptest! {
    #[test]
    fn printed_expressions_reparse_identically(e in expr()) {
        let printed = e.to_string();
        prop_assert_eq!(parse(&printed).unwrap(), e, "{}", printed);
    }

    #[test]
    fn jet_product_obeys_leibniz(x in prop::array::uniform4(-1.5f64..1.5), u in 0usize..4, v in 0usize..4) {
        let p = EvalPoint::new(x).unwrap();
        let a = Jet::seed(&p, u, 3).unwrap().sin();
        let b = Jet::seed(&p, v, 3).unwrap().exp();
        let lhs = (a * b).d(u);
        let rhs = a.d(u) * b + a * b.d(u);
        for (l, r) in lhs.coeffs().iter().zip(rhs.coeffs()) {
            prop_assert!((l - r).abs() < 1e-12);
        }
    }
}
