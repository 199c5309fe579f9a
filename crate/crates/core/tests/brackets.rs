#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use cqm_core::background::{Background, Observer};
use cqm_core::hermitian::*;
use cqm_core::sampling;
use cqm_core::special::*;

fn triples(seed: u64) -> Vec<[SpecialFunction; 3]> {
    let mut r = sampling::rng(seed);
    (0..3).map(|k| std::array::from_fn(|i| sampling::special_function(&mut r, &format!("F{k}{i}"), 2, true, true).unwrap())).collect()
}

fn jacobi_max(bg: &Background, seed: u64) -> f64 {
    let pts = sampling::points(&mut sampling::rng(seed), unit_box(), 100);
    let mut worst: f64 = 0.0;
    for t in triples(seed) {
        for p in &pts {
            worst = worst.max(jacobi_residual(&t[0], &t[1], &t[2], bg, p).unwrap());
        }
    }
    worst
}

#[test]
fn jacobi_flat_and_curved() {
    let flat = jacobi_max(&flat(), 11);
    assert!(flat < 1e-9, "flat {flat:e}");
    let curved = jacobi_max(&curved_magnetic(), 12);
    assert!(curved < 1e-8, "curved {curved:e}");
}

#[test]
fn jacobi_with_builtins() {
    let bg = curved_magnetic();
    let p = pt([0.1, 0.3, -0.2, 0.4]);
    let h = SpecialFunction::energy_prime(&bg);
    let p1 = SpecialFunction::momentum(1);
    let s = SpecialFunction::spin(["x1", "1", "x2*x3"], &bg.constants).unwrap();
    assert!(jacobi_residual(&h, &p1, &s, &bg, &p).unwrap() < 1e-10);
}

fn homomorphism_max(bg: &Background, seed: u64) -> f64 {
    let mut r = sampling::rng(seed);
    let pts = sampling::points(&mut r, unit_box(), 5);
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let f = sampling::special_function(&mut r, "F", 2, true, k % 3 != 0).unwrap();
        let g = sampling::special_function(&mut r, "G", 2, k % 2 == 0, k % 4 != 1).unwrap();
        for p in &pts {
            let ctx = HCtx::new(bg, p, 3).unwrap();
            let br = bracket_jets(&f.jets(&ctx.b, 3).unwrap(), &g.jets(&ctx.b, 3).unwrap(), ctx.bracket_ctx().unwrap());
            let lhs = from_special_jets(&br, &ctx).unwrap();
            let rhs = lie_bracket_y(&from_special(&f, &ctx, 3).unwrap(), &from_special(&g, &ctx, 3).unwrap());
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
    }
    worst
}

#[test]
fn bracket_homomorphism_flat_and_curved() {
    let a = homomorphism_max(&flat_magnetic(), 21);
    assert!(a < 1e-9, "flat {a:e}");
    let b = homomorphism_max(&curved_magnetic(), 22);
    assert!(b < 1e-9, "curved {b:e}");
}

#[test]
fn pair_bracket_matches_lie_bracket() {
    let bg = curved_magnetic();
    let mut r = sampling::rng(31);
    for p in sampling::points(&mut r.clone(), unit_box(), 20) {
        let ctx = HCtx::new(&bg, &p, 3).unwrap();
        let f = sampling::special_function(&mut r, "F", 2, true, true).unwrap();
        let g = sampling::special_function(&mut r, "G", 2, true, true).unwrap();
        let (hf, hg) = (from_special(&f, &ctx, 3).unwrap(), from_special(&g, &ctx, 3).unwrap());
        let lie = lie_bracket_y(&hf, &hg);
        let (vf, vg) = (vertical_projection(&hf, &ctx, None), vertical_projection(&hg, &ctx, None));
        let (x, m) = pair_bracket((&hf.x, &vf), (&hg.x, &vg), &ctx).unwrap();
        let back = HJets { x, y: cm_add(&m, &connection_lift(&x, &ctx, None).y) };
        assert!(back.max_abs_diff(&lie) < 1e-10, "{}", back.max_abs_diff(&lie));
        // lift + projection round trip
        let rebuilt = cm_add(&connection_lift(&hf.x, &ctx, None).y, &vf);
        assert!(HJets { x: hf.x, y: rebuilt }.max_abs_diff(&hf) < 1e-14);
    }
}

#[test]
fn round_trip_and_hermiticity() {
    let bg = curved_magnetic();
    let mut r = sampling::rng(41);
    for p in sampling::points(&mut r.clone(), unit_box(), 20) {
        let ctx = HCtx::new(&bg, &p, 2).unwrap();
        let f = sampling::special_function(&mut r, "F", 2, true, true).unwrap();
        let h = from_special(&f, &ctx, 2).unwrap();
        assert!(eta_residual(&h, &ctx.b.sqrtg).unwrap() < 1e-10);
        let back = to_special(&h, &ctx, Provenance::FromSpecial).unwrap();
        let want = f.jets(&ctx.b, 0).unwrap().value();
        assert!(back.max_abs_diff(&want) < 1e-10, "{back:?} {want:?}");
    }
}

#[test]
fn observer_independence() {
    let bg = curved_magnetic();
    let mut r = sampling::rng(51);
    let observers: Vec<Observer> = (0..5)
        .map(|k| {
            let e = [0, 1, 2].map(|_| sampling::polynomial(&mut r, &[0, 1, 2, 3], 1).to_string());
            Observer::parse(&format!("o{k}"), [&e[0], &e[1], &e[2]], &bg.constants).unwrap()
        })
        .collect();
    let f = sampling::special_function(&mut r, "F", 2, false, true).unwrap();
    for p in sampling::points(&mut r, unit_box(), 100) {
        let base = invariant_combination(&f, &bg, &Observer::reference(), &p).unwrap();
        for o in &observers {
            let v = invariant_combination(&f, &bg, o, &p).unwrap();
            assert!((v - base).abs() < 1e-11 * base.abs().max(1.0));
        }
    }
}

#[test]
fn bracket_antisymmetry_and_vector_morphism() {
    let bg = curved_magnetic();
    let mut r = sampling::rng(61);
    for p in sampling::points(&mut r.clone(), unit_box(), 20) {
        let f = sampling::special_function(&mut r, "F", 2, true, true).unwrap();
        let g = sampling::special_function(&mut r, "G", 2, true, true).unwrap();
        let a = extended_bracket(&f, &g, &bg, &p).unwrap();
        let b = extended_bracket(&g, &f, &bg, &p).unwrap();
        for (x, y) in a.as_array().iter().zip(b.as_array()) {
            assert!((x + y).abs() < 1e-13);
        }
        let b2 = bg.jets(&p, 2).unwrap();
        let (xf, xg) = (f.jets(&b2, 1).unwrap().vector(), g.jets(&b2, 1).unwrap().vector());
        for l in 0..4 {
            let mut c = 0.0;
            for m in 0..4 {
                c += xf[m].value() * xg[l].d(m).value() - xg[m].value() * xf[l].d(m).value();
            }
            let want = if l == 0 { a.f0 } else { -a.fi[l - 1] };
            assert!((c - want).abs() < 1e-13);
        }
    }
}

#[test]
fn projectable_subalgebra_closes() {
    let bg = flat_magnetic();
    let mut r = sampling::rng(71);
    let f = sampling::special_function(&mut r, "F", 3, false, true).unwrap();
    let g = sampling::special_function(&mut r, "G", 3, false, true).unwrap();
    for p in sampling::points(&mut r, unit_box(), 10) {
        let b = bg.jets(&p, 3).unwrap();
        let ctx = cqm_core::special::BracketCtx::new(&b).unwrap();
        let br = bracket_jets(&f.jets(&b, 3).unwrap(), &g.jets(&b, 3).unwrap(), &ctx);
        for i in 1..4 {
            assert!(br.f0.d(i).value().abs() < 1e-14);
        }
    }
}

#[test]
fn jacobi_scales_cubically() {
    let bg = curved_magnetic();
    let t = &triples(81)[0];
    let p = pt([0.2, -0.4, 0.1, 0.3]);
    let r1 = jacobi_residual(&t[0], &t[1], &t[2], &bg, &p).unwrap();
    let doubled: Vec<SpecialFunction> = t
        .iter()
        .map(|f| {
            let mut g = f.clone();
            let dbl = |c: &Comp| match c {
                Comp::Expr(d) => Comp::Expr(
                    cqm_core::expr::FieldDef::new(
                        "d",
                        d.dim,
                        cqm_core::expr::Expr::bin(cqm_core::expr::BinOp::Mul, cqm_core::expr::Expr::num(2.0), d.expr.clone()),
                        &bg.constants,
                    )
                    .unwrap(),
                ),
                other => other.clone(),
            };
            g.f0 = dbl(&f.f0);
            g.fi = f.fi.clone().map(|c| dbl(&c));
            g.fbrev = dbl(&f.fbrev);
            g.phi = f.phi.clone().map(|c| dbl(&c));
            g
        })
        .collect();
    let r2 = jacobi_residual(&doubled[0], &doubled[1], &doubled[2], &bg, &p).unwrap();
    assert!(r2 <= 8.0 * r1.max(1e-15) * 4.0 + 1e-12, "{r1:e} {r2:e}");
}

#[test]
fn bracket_homomorphism_detects_inconsistent_potential() {
    let bg = flat().with_f(1, 2, "b").unwrap();
    assert!(homomorphism_max(&bg, 23) > 1e-3);
}
