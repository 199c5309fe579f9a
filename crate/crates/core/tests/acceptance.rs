#![allow(clippy::needless_range_loop)]

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::corpus::{check_jet_corpus, check_parser_corpus, jet_corpus, parser_corpus};
use common::*;
use cqm_core::background::{eps, Background, Coupling, Observer};
use cqm_core::hermitian::*;
use cqm_core::pauli::{commutator, gtilde, identity, sigma, spin_connection_from, spin_curvature, xi, SpinMatrix};
use cqm_core::quantum::*;
use cqm_core::sampling;
use cqm_core::scenario::Scenario;
use cqm_core::special::{bracket_jets, jacobi_residual, SpecialFunction};
use cqm_core::verify::run_evolve;
use num_complex::Complex64;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn within(label: &str, value: f64, tol: f64) -> Outcome {
    check(label, value, tol, value < tol)
}

fn at_most(label: &str, value: f64, tol: f64) -> Outcome {
    check(label, value, tol, value <= tol)
}

fn check(label: &str, value: f64, tol: f64, ok: bool) -> Outcome {
    let s = format!("{label} {value:.3e} (tol {tol:.0e})");
    if value.is_finite() && ok {
        Ok(s)
    } else {
        Err(s)
    }
}

fn all(parts: Vec<Outcome>) -> Outcome {
    let ok = parts.iter().all(|p| p.is_ok());
    let text = parts.into_iter().map(|p| p.unwrap_or_else(|e| format!("{e} FAILED"))).collect::<Vec<_>>().join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let out = f();
    let el = start.elapsed();
    let note = format!("{:.2} s", el.as_secs_f64());
    match (out, limit) {
        (Ok(s), Some(l)) if el >= l => Err(format!("{s}; runtime {note} exceeds {:.0} s", l.as_secs_f64())),
        (Ok(s), _) => Ok(format!("{s}; {note}")),
        (Err(s), _) => Err(format!("{s}; {note}")),
    }
}

fn scenario(name: &str) -> Scenario {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name].iter().collect();
    Scenario::from_path(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn max_diff(a: &SpinMatrix, b: &SpinMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn pauli_algebra() -> Outcome {
    let (mut prod, mut comm, mut metric) = (0.0f64, 0.0f64, 0.0f64);
    for a in 1..4 {
        for b in 1..4 {
            let mut want = if a == b { identity() } else { SpinMatrix::zeros() };
            let mut want_c = SpinMatrix::zeros();
            for k in 1..4 {
                want += sigma(k) * c(0.0, eps(a - 1, b - 1, k - 1));
                want_c += xi(k) * c(eps(a - 1, b - 1, k - 1), 0.0);
            }
            prod = prod.max(max_diff(&(sigma(a) * sigma(b)), &want));
            comm = comm.max(max_diff(&commutator(&xi(a), &xi(b)), &want_c));
            metric = metric.max((gtilde(&xi(a), &xi(b)) - c(if a == b { 1.0 } else { 0.0 }, 0.0)).norm());
        }
    }
    all(vec![at_most("sigma products", prod, 1e-15), at_most("xi commutators", comm, 1e-15), at_most("gtilde", metric, 1e-15)])
}

fn jacobi_max(bg: &Background, seed: u64) -> f64 {
    let mut r = sampling::rng(seed);
    let pts = sampling::points(&mut r, unit_box(), 100);
    let fs: Vec<SpecialFunction> = (0..3).map(|k| sampling::special_function(&mut r, &format!("R{k}"), 2, true, true).unwrap()).collect();
    pts.iter().map(|p| jacobi_residual(&fs[0], &fs[1], &fs[2], bg, p).unwrap()).fold(0.0, f64::max)
}

fn jacobi() -> Outcome {
    all(vec![within("flat", jacobi_max(&flat(), 101), 1e-8), within("curved+magnetic", jacobi_max(&curved_magnetic(), 102), 1e-8)])
}

fn bracket_homomorphism() -> Outcome {
    let mut r = sampling::rng(103);
    let pts = sampling::points(&mut r, unit_box(), 100);
    let pairs: Vec<[SpecialFunction; 2]> = (0..20)
        .map(|k| [sampling::special_function(&mut r, "F", 2, true, true).unwrap(), sampling::special_function(&mut r, "G", 2, k % 2 == 0, true).unwrap()])
        .collect();
    let mut parts = Vec::new();
    for (label, bg) in [("flat+magnetic", flat_magnetic()), ("curved+magnetic", curved_magnetic())] {
        let mut worst = 0.0f64;
        for p in &pts {
            let ctx = HCtx::new(&bg, p, 3).unwrap();
            let bc = ctx.bracket_ctx().unwrap();
            for [f, g] in &pairs {
                let (jf, jg) = (f.jets(&ctx.b, 3).unwrap(), g.jets(&ctx.b, 3).unwrap());
                let lhs = from_special_jets(&bracket_jets(&jf, &jg, bc), &ctx).unwrap();
                let rhs = lie_bracket_y(&from_special_jets(&jf, &ctx).unwrap(), &from_special_jets(&jg, &ctx).unwrap());
                worst = worst.max(lhs.max_abs_diff(&rhs));
            }
        }
        parts.push(within(&format!("{label}, 20 pairs x 100 points"), worst, 1e-9));
    }
    all(parts)
}

fn observer_independence() -> Outcome {
    let bg = curved_magnetic();
    let mut r = sampling::rng(104);
    let observers: Vec<Observer> = (0..5)
        .map(|k| {
            let e = [0, 1, 2].map(|_| sampling::polynomial(&mut r, &[0, 1, 2, 3], 1).to_string());
            Observer::parse(&format!("o{k}"), [&e[0], &e[1], &e[2]], &bg.constants).unwrap()
        })
        .collect();
    let f = sampling::special_function(&mut r, "F", 2, false, true).unwrap();
    let mut worst = 0.0f64;
    for p in sampling::points(&mut r, unit_box(), 100) {
        let base = invariant_combination(&f, &bg, &Observer::reference(), &p).unwrap();
        for o in &observers {
            let v = invariant_combination(&f, &bg, o, &p).unwrap();
            worst = worst.max((v - base).abs() / base.abs().max(1.0));
        }
    }
    within("5 observers x 100 points", worst, 1e-11)
}

fn curvature_identity() -> Outcome {
    let bg = curved_magnetic();
    let (mut rc, mut rt) = (0.0f64, 0.0f64);
    for p in sampling::points(&mut sampling::rng(105), unit_box(), 100) {
        let b = bg.jets(&p, 3).unwrap();
        let r = spin_curvature(&spin_connection_from(&b, Coupling::Moment).unwrap());
        let rho = b.rho(Coupling::Moment).unwrap();
        let rcheck = b.rcheck(Coupling::Moment).unwrap();
        for l in 0..4 {
            for m in 0..4 {
                for k in 0..3 {
                    rc = rc.max((r[l][m][k].value() - rho[l][m][k].value()).abs());
                    for j in 0..3 {
                        let s: f64 = (0..3).map(|i| r[l][m][i].value() * eps(i, j, k)).sum();
                        rt = rt.max((rcheck[l][m][k][j].value() - s).abs());
                    }
                }
            }
        }
    }
    all(vec![within("R[C] - rho", rc, 1e-9), within("Rtilde - R eps", rt, 1e-10)])
}

fn isomorphism_machinery() -> Outcome {
    let bg = curved_magnetic();
    let mut r = sampling::rng(106);
    let (mut rt, mut dual) = (0.0f64, 0.0f64);
    for p in sampling::points(&mut r.clone(), unit_box(), 100) {
        let ctx = HCtx::new(&bg, &p, 3).unwrap();
        let f = sampling::special_function(&mut r, "F", 2, true, true).unwrap();
        let g = sampling::special_function(&mut r, "G", 2, true, true).unwrap();
        let (hf, hg) = (from_special(&f, &ctx, 3).unwrap(), from_special(&g, &ctx, 3).unwrap());
        let back = to_special(&hf, &ctx, Provenance::FromSpecial).unwrap();
        rt = rt.max(back.max_abs_diff(&f.jets(&ctx.b, 0).unwrap().value()));
        let lie = lie_bracket_y(&hf, &hg);
        let (vf, vg) = (vertical_projection(&hf, &ctx, None), vertical_projection(&hg, &ctx, None));
        let (x, m) = pair_bracket((&hf.x, &vf), (&hg.x, &vg), &ctx).unwrap();
        let rebuilt = HJets { x, y: cm_add(&m, &connection_lift(&x, &ctx, None).y) };
        dual = dual.max(rebuilt.max_abs_diff(&lie));
    }
    all(vec![within("h o j - id", rt, 1e-10), within("pair bracket vs Lie bracket", dual, 1e-10)])
}

fn random_grid(layout: Layout, seed: u64) -> SpinorGrid {
    let mut r = sampling::rng(seed);
    let mut g = SpinorGrid::zeros(layout);
    for p in g.psi.iter_mut() {
        *p = [c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)), c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))];
    }
    g
}

fn cube(n: usize) -> Layout {
    Layout::new([Axis::new(-1.0, 1.0, n).unwrap(); 3], 0.0).unwrap()
}

fn named_operators() -> Outcome {
    let q = QuantumData::new(flat_magnetic());
    let l = cube(32);
    let g = q.geometry(&l).unwrap();
    let psi = random_grid(l, 107);
    let n = [0.6, 0.0, 0.8];
    let mut cases: Vec<(SpecialFunction, GridOperator)> = (0..4).map(|k| (SpecialFunction::coordinate(k), named::position(&g, k))).collect();
    cases.push((SpecialFunction::momentum(1), named::momentum(&g, 1)));
    cases.push((SpecialFunction::energy_prime(&q.bg), named::energy_prime(&g)));
    cases.push((SpecialFunction::spin(["0.6", "0", "0.8"], &q.bg.constants).unwrap(), named::spin(&g, |_| n)));
    let mut worst = 0.0f64;
    for (f, closed) in &cases {
        let a = prequantum(&q, &g, f).unwrap().apply(&psi).unwrap();
        worst = worst.max(a.max_abs_diff(&closed.apply(&psi).unwrap()).unwrap());
    }
    let h = pauli_generator(&q, &g).unwrap().apply(&psi).unwrap();
    let h0 = prequantum(&q, &g, &SpecialFunction::energy_prime(&q.bg)).unwrap().apply(&psi).unwrap();
    all(vec![within("x^l, P1, H0', n-flat on 32^3", worst, 1e-10), within("generator lock", h.max_abs_diff(&h0).unwrap(), 1e-10)])
}

fn bump(seed: u64) -> impl Fn([f64; 4]) -> Spinor {
    let mut r = sampling::rng(seed);
    let coef: Vec<[f64; 4]> = (0..2).map(|_| std::array::from_fn(|_| r.gen_range(-1.0..1.0))).collect();
    let phase: [f64; 3] = std::array::from_fn(|_| r.gen_range(-2.0..2.0));
    move |x: [f64; 4]| {
        let env: f64 = (1..4).map(|i| (1.0 - x[i] * x[i]).powi(3)).product();
        let arg = phase[0] * x[1] + phase[1] * x[2] + phase[2] * x[3];
        std::array::from_fn(|a| {
            let k = coef[a];
            c(k[0] + k[1] * x[1], k[2] + k[3] * x[2] * x[3]) * c(0.0, arg).exp() * env
        })
    }
}

fn symmetry_residual(q: &QuantumData, f: &SpecialFunction, n: usize, seed: u64) -> f64 {
    let l = cube(n);
    let g = q.geometry(&l).unwrap();
    let (a, b) = (SpinorGrid::from_fn(l, bump(seed)), SpinorGrid::from_fn(l, bump(seed + 1)));
    let o = prequantum(q, &g, f).unwrap();
    (g.inner(&a, &o.apply(&b).unwrap()).unwrap() - g.inner(&o.apply(&a).unwrap(), &b).unwrap()).norm()
}

fn symmetry() -> Outcome {
    let q = QuantumData::new(curved_magnetic());
    let mut parts = Vec::new();
    for f in [SpecialFunction::momentum(1), SpecialFunction::energy_prime(&q.bg)] {
        let mut ratio = f64::INFINITY;
        for seed in [108, 110] {
            ratio = ratio.min(symmetry_residual(&q, &f, 13, seed) / symmetry_residual(&q, &f, 25, seed));
        }
        let s = format!("{} ratio {ratio:.2} (min 3.5)", f.name);
        parts.push(if ratio >= 3.5 { Ok(s) } else { Err(s) });
    }
    all(parts)
}

fn larmor() -> Outcome {
    let scn = scenario("larmor.json");
    let ev = scn.file.evolve.clone().unwrap();
    let (_, summary) = run_evolve(&scn, ev.steps, ev.dt).unwrap();
    let p = &scn.file.physical;
    let omega = p.u0 * p.mu * scn.file.constants["b"].value;
    let measured = summary.frequency.as_ref().unwrap().measured;
    let periods = summary.final_time * omega / (2.0 * std::f64::consts::PI);
    let enough = if periods >= 20.0 { Ok(format!("{periods:.1} periods")) } else { Err(format!("{periods:.1} periods (min 20)")) };
    all(vec![enough, within("frequency rel. error", (measured - omega).abs() / omega, 1e-3), within("norm drift", summary.norm_drift, 1e-12)])
}

fn free_packet() -> Outcome {
    let scn = scenario("free_packet.json");
    let ev = scn.file.evolve.clone().unwrap();
    let (traj, summary) = run_evolve(&scn, ev.steps, ev.dt).unwrap();
    let p = &scn.file.physical;
    let s0 = scn.file.psi0.as_ref().unwrap().sigma[0].unwrap();
    let (lo, hi, _) = scn.file.grid.as_ref().unwrap().axes[0];
    let diffusivity = p.u0 * p.hbar / (2.0 * p.m);
    let (mut worst, mut used) = (0.0f64, 0);
    for r in traj.records.iter().filter(|r| 4.0 * r.w[0] < (hi - lo) / 4.0) {
        let want = s0 * (1.0 + (diffusivity * r.time / (s0 * s0)).powi(2)).sqrt();
        worst = worst.max((r.w[0] - want).abs() / want);
        used += 1;
    }
    let coverage =
        if used == traj.records.len() { Ok(format!("{used} records")) } else { Err(format!("{used}/{} records inside quarter box", traj.records.len())) };
    all(vec![coverage, within("width rel. error", worst, 0.01), within("norm drift", summary.norm_drift, 1e-12)])
}

fn jet_kernel() -> Outcome {
    let out = check_jet_corpus();
    let s = format!("{} expressions, {} slot comparisons, min h-halving ratio {:.2} (min 3.5)", jet_corpus().len(), out.comparisons, out.min_ratio);
    if out.count == 20 && out.min_ratio >= 3.5 {
        Ok(s)
    } else {
        Err(format!("{s}; worst {}", out.worst))
    }
}

fn parser() -> Outcome {
    let out = check_parser_corpus();
    let rt = if out.round_trip_failures.is_empty() && out.count == 50 {
        Ok(format!("{} round trips", parser_corpus().len()))
    } else {
        Err(format!("round trip failures {:?}", out.round_trip_failures))
    };
    all(vec![rt, at_most("oracle rel. error", out.max_rel_error, 1e-15)])
}

fn main() -> ExitCode {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let criteria: Vec<Criterion> = vec![
        ("Pauli algebra lock", secs(1), pauli_algebra),
        ("Jacobi identity of the extended bracket", secs(30), jacobi),
        ("bracket isomorphism to Hermitian fields", secs(60), bracket_homomorphism),
        ("observer independence", None, observer_independence),
        ("spin curvature equals rho", None, curvature_identity),
        ("isomorphism machinery", None, isomorphism_machinery),
        ("named pre-quantum operators", None, named_operators),
        ("symmetry of pre-quantum operators", None, symmetry),
        ("Larmor precession", secs(10), larmor),
        ("free-packet dispersion", None, free_packet),
        ("jet kernel", None, jet_kernel),
        ("expression parser", None, parser),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let out = std::panic::catch_unwind(|| timed(limit, f)).unwrap_or_else(|_| Err("panicked".into()));
        match out {
            Ok(s) => println!("[PASS] {:>2}. {name}: {s}", i + 1),
            Err(s) => {
                failed += 1;
                println!("[FAIL] {:>2}. {name}: {s}", i + 1);
            }
        }
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
