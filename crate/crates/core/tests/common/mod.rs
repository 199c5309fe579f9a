#![allow(dead_code)]

pub mod corpus;

use cqm_core::background::{standard_constants, Background};
use cqm_core::expr::Constants;
use cqm_core::jet::EvalPoint;
use cqm_core::units::Dim;

pub fn consts() -> Constants {
    standard_constants(1.0, 1.0, 1.0, 0.5, 1.0)
        .unwrap()
        .with("b", 0.3, Dim::em_form())
        .unwrap()
        .with("e", 0.2, Dim::em_form())
        .unwrap()
        .with("qb", 0.3, Dim::NONE)
        .unwrap()
        .with("qe", 0.2, Dim::NONE)
        .unwrap()
}

pub fn pt(x: [f64; 4]) -> EvalPoint {
    EvalPoint::new(x).unwrap()
}

pub fn flat() -> Background {
    Background::flat(consts()).unwrap()
}

/// g = (1 + 0.1 x1²)δ with Levi-Civita K, Newtonian K^1_00 = −0.2 x1, F₁₂ = b, F₀₃ = e,
/// and a potential with dA = Φ for the reference observer.
pub fn curved_magnetic() -> Background {
    let gs = "1 + 0.1*x1*x1";
    let mut bg = flat();
    for i in 1..=3 {
        bg = bg.with_metric(i, i, gs).unwrap();
    }
    bg.with_levi_civita(true)
        .unwrap()
        .with_kgrav(1, 0, 0, "-0.2*x1")
        .unwrap()
        .with_f(1, 2, "b")
        .unwrap()
        .with_f(0, 3, "e")
        .unwrap()
        .with_potential(0, "-qe*x3 - (0.1*x1^2 + 0.005*x1^4)")
        .unwrap()
        .with_potential(1, "-qb*x2/2")
        .unwrap()
        .with_potential(2, "qb*x1/2")
        .unwrap()
}

/// Flat space with a uniform field and matching potential.
pub fn flat_magnetic() -> Background {
    flat().with_f(1, 2, "b").unwrap().with_potential(1, "-qb*x2/2").unwrap().with_potential(2, "qb*x1/2").unwrap()
}

pub fn unit_box() -> [[f64; 2]; 4] {
    [[-1.0, 1.0]; 4]
}
