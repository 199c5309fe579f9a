//! Seeded sample points and random polynomial special functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::expr::{BinOp, Constants, Expr, FieldDef};
use crate::jet::EvalPoint;
use crate::special::{Comp, SpecialFunction};
use crate::units::Dim;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform points in the box `[lo, hi]` per chart axis.
pub fn points(rng: &mut impl Rng, bounds: [[f64; 2]; 4], count: usize) -> Vec<EvalPoint> {
    (0..count)
        .map(|_| {
            let x = std::array::from_fn(|i| {
                let [lo, hi] = bounds[i];
                if hi > lo {
                    rng.gen_range(lo..hi)
                } else {
                    lo
                }
            });
            EvalPoint { x }
        })
        .collect()
}

/// Random polynomial of total degree ≤ `degree` in the variables `vars`, coefficients in [−1, 1].
pub fn polynomial(rng: &mut impl Rng, vars: &[u8], degree: u32) -> Expr {
    let mut monomials: Vec<Vec<u8>> = vec![vec![]];
    let mut frontier = monomials.clone();
    for _ in 0..degree {
        let mut next = Vec::new();
        for m in &frontier {
            for &v in vars.iter().filter(|&&v| m.last().is_none_or(|&l| v >= l)) {
                let mut n = m.clone();
                n.push(v);
                next.push(n);
            }
        }
        monomials.extend(next.iter().cloned());
        frontier = next;
    }
    let mut e: Option<Expr> = None;
    for m in monomials {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let mut term = Expr::num(c.abs());
        for &v in &m {
            term = Expr::bin(BinOp::Mul, term, Expr::var(v));
        }
        e = Some(match e {
            None if c < 0.0 => Expr::un(crate::expr::UnaryOp::Neg, term),
            None => term,
            Some(acc) => Expr::bin(if c < 0.0 { BinOp::Sub } else { BinOp::Add }, acc, term),
        });
    }
    e.unwrap()
}

fn comp(rng: &mut impl Rng, vars: &[u8], degree: u32, scale: f64) -> Result<Comp> {
    let e = Expr::bin(BinOp::Mul, Expr::num(scale), polynomial(rng, vars, degree));
    Ok(Comp::Expr(FieldDef::new("rand", Dim::NONE, e, &Constants::new())?))
}

/// Random special function with polynomial components; `f⁰` depends on time only.
pub fn special_function(rng: &mut impl Rng, name: &str, degree: u32, with_spin: bool, with_f0: bool) -> Result<SpecialFunction> {
    let all = [0u8, 1, 2, 3];
    let mut f = SpecialFunction::zero(name);
    if with_f0 {
        f.f0 = comp(rng, &[0], degree, 1.0)?;
    }
    for i in 0..3 {
        f.fi[i] = comp(rng, &all, degree, 1.0)?;
    }
    f.fbrev = comp(rng, &all, degree, 1.0)?;
    if with_spin {
        for i in 0..3 {
            f.phi[i] = comp(rng, &all, degree, 1.0)?;
        }
    }
    Ok(f)
}
