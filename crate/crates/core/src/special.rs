//! Special phase functions, their vector fields and the curvature-corrected bracket.

use crate::background::{eps, Background, BgJets, Coupling, FrameConn, Observer, PhasePoint, Rho};
use crate::error::{CqmError, Result};
use crate::expr::{Constants, FieldDef};
use crate::jet::{EvalPoint, Jet, MAX_ORDER};
use crate::units::Dim;

/// One component of a special function.
#[derive(Clone, Debug)]
pub enum Comp {
    Expr(FieldDef),
    /// `factor · A_index` (reference-observer potential).
    Potential {
        index: usize,
        factor: f64,
    },
    /// `factor · B^index` (frame components of the magnetic field).
    Magnetic {
        index: usize,
        factor: f64,
    },
}

impl Comp {
    pub fn zero() -> Comp {
        Comp::Expr(FieldDef::literal("0", 0.0))
    }

    pub fn constant(v: f64) -> Comp {
        Comp::Expr(FieldDef::literal("c", v))
    }

    pub fn parse(name: &str, src: &str, c: &Constants) -> Result<Comp> {
        Ok(Comp::Expr(FieldDef::parse(name, Dim::NONE, src, c)?))
    }

    fn eval(&self, b: &BgJets, mag: &mut Option<[Jet; 3]>, order: usize) -> Result<Jet> {
        match self {
            Comp::Expr(f) => f.eval(&b.point, order),
            Comp::Potential { index, factor } => Ok(b.a[*index].truncate(order).scale(*factor)),
            Comp::Magnetic { index, factor } => {
                let m = mag.get_or_insert_with(|| b.magnetic());
                Ok(m[*index].truncate(order).scale(*factor))
            }
        }
    }

    /// Depends on the spatial chart variables.
    fn spatial(&self) -> bool {
        match self {
            Comp::Expr(f) => (1..4).any(|i| f.expr.uses_var(i)),
            _ => true,
        }
    }
}

/// The component tuple `(f⁰, f^i, f̆, φ_a)`; `φ` in orthonormal-frame components.
#[derive(Clone, Debug)]
pub struct SpecialFunction {
    pub name: String,
    pub f0: Comp,
    pub fi: [Comp; 3],
    pub fbrev: Comp,
    pub phi: [Comp; 3],
}

impl SpecialFunction {
    pub fn zero(name: &str) -> SpecialFunction {
        SpecialFunction {
            name: name.into(),
            f0: Comp::zero(),
            fi: [Comp::zero(), Comp::zero(), Comp::zero()],
            fbrev: Comp::zero(),
            phi: [Comp::zero(), Comp::zero(), Comp::zero()],
        }
    }

    /// Builds from expression sources.
    pub fn parse(name: &str, f0: &str, fi: [&str; 3], fbrev: &str, phi: [&str; 3], c: &Constants) -> Result<SpecialFunction> {
        let p = |part: &str, s: &str| Comp::parse(&format!("{name}.{part}"), s, c);
        Ok(SpecialFunction {
            name: name.into(),
            f0: p("f0", f0)?,
            fi: [p("f1", fi[0])?, p("f2", fi[1])?, p("f3", fi[2])?],
            fbrev: p("fbrev", fbrev)?,
            phi: [p("phi1", phi[0])?, p("phi2", phi[1])?, p("phi3", phi[2])?],
        })
    }

    /// Coordinate function `x^λ`.
    pub fn coordinate(l: usize) -> SpecialFunction {
        let mut f = SpecialFunction::zero(&format!("x{l}"));
        let src = format!("x{l}");
        f.fbrev = Comp::parse("x", &src, &Constants::new()).expect("coordinate expression");
        f
    }

    /// Momentum `P_i`: `f^i = 1`, `f̆ = A_i`.
    pub fn momentum(i: usize) -> SpecialFunction {
        let mut f = SpecialFunction::zero(&format!("P{i}"));
        f.fi[i - 1] = Comp::constant(1.0);
        f.fbrev = Comp::Potential { index: i, factor: 1.0 };
        f
    }

    /// Energy `H₀`: `f⁰ = 1`, `f̆ = −A₀`.
    pub fn energy() -> SpecialFunction {
        let mut f = SpecialFunction::zero("H0");
        f.f0 = Comp::constant(1.0);
        f.fbrev = Comp::Potential { index: 0, factor: -1.0 };
        f
    }

    /// Energy with magnetic-moment term, `φ = −u₀μB`.
    pub fn energy_prime(bg: &Background) -> SpecialFunction {
        let mut f = SpecialFunction::energy();
        f.name = "H0prime".into();
        let k = -bg.phys.u0 * bg.phys.mu;
        f.phi = [0, 1, 2].map(|a| Comp::Magnetic { index: a, factor: k });
        f
    }

    /// Pure spin function with frame components `n`.
    pub fn spin(n: [&str; 3], c: &Constants) -> Result<SpecialFunction> {
        SpecialFunction::parse("spin_n", "0", ["0", "0", "0"], "0", n, c)
    }

    /// Named builtin: `x0..x3`, `P1..P3`, `H0`, `H0prime`.
    pub fn builtin(name: &str, bg: &Background) -> Option<SpecialFunction> {
        match name {
            "x0" | "x1" | "x2" | "x3" => Some(SpecialFunction::coordinate(name[1..].parse().ok()?)),
            "P1" | "P2" | "P3" => Some(SpecialFunction::momentum(name[1..].parse().ok()?)),
            "H0" => Some(SpecialFunction::energy()),
            "H0prime" => Some(SpecialFunction::energy_prime(bg)),
            _ => None,
        }
    }

    /// Whether `f⁰` depends on the spatial chart variables.
    pub fn f0_is_spatial(&self) -> bool {
        self.f0.spatial()
    }

    /// Component jets at the point of `b`.
    pub fn jets(&self, b: &BgJets, order: usize) -> Result<SfJets> {
        if order > MAX_ORDER {
            return Err(CqmError::OrderOutOfRange(order));
        }
        let mut mag = None;
        let mut e = |c: &Comp| c.eval(b, &mut mag, order);
        Ok(SfJets {
            f0: e(&self.f0)?,
            fi: [e(&self.fi[0])?, e(&self.fi[1])?, e(&self.fi[2])?],
            fbrev: e(&self.fbrev)?,
            phi: [e(&self.phi[0])?, e(&self.phi[1])?, e(&self.phi[2])?],
        })
    }
}

/// Special-function components as jets at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SfJets {
    pub f0: Jet,
    pub fi: [Jet; 3],
    pub fbrev: Jet,
    pub phi: [Jet; 3],
}

/// Special-function components at one point.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SfValue {
    pub f0: f64,
    pub fi: [f64; 3],
    pub fbrev: f64,
    pub phi: [f64; 3],
}

impl SfValue {
    pub fn as_array(&self) -> [f64; 8] {
        [self.f0, self.fi[0], self.fi[1], self.fi[2], self.fbrev, self.phi[0], self.phi[1], self.phi[2]]
    }

    pub fn max_abs_diff(&self, o: &SfValue) -> f64 {
        self.as_array().iter().zip(o.as_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl SfJets {
    pub fn order(&self) -> usize {
        self.all().iter().map(|j| j.order()).min().unwrap()
    }

    fn all(&self) -> [Jet; 8] {
        [self.f0, self.fi[0], self.fi[1], self.fi[2], self.fbrev, self.phi[0], self.phi[1], self.phi[2]]
    }

    pub fn value(&self) -> SfValue {
        SfValue { f0: self.f0.value(), fi: self.fi.map(|j| j.value()), fbrev: self.fbrev.value(), phi: self.phi.map(|j| j.value()) }
    }

    /// `X[f] = f⁰∂₀ − f^i∂_i` as chart components.
    pub fn vector(&self) -> [Jet; 4] {
        [self.f0, -self.fi[0], -self.fi[1], -self.fi[2]]
    }

    /// `(f⁰, f¹, f², f³)`.
    fn upper(&self) -> [Jet; 4] {
        [self.f0, self.fi[0], self.fi[1], self.fi[2]]
    }
}

/// Background data entering the bracket at one point.
#[derive(Clone, Debug)]
pub struct BracketCtx {
    /// Φ[o] for the reference observer.
    pub phi: [[Jet; 4]; 4],
    /// Moment-joined frame connection.
    pub ktilde: FrameConn,
    /// Moment-joined ρ.
    pub rho: Rho,
}

impl BracketCtx {
    /// Needs background jets of order ≥ 2.
    pub fn new(b: &BgJets) -> Result<BracketCtx> {
        Ok(BracketCtx { phi: b.phi(None)?, ktilde: b.ktilde(Coupling::Moment)?, rho: b.rho(Coupling::Moment)? })
    }
}

fn dot_d(x: &[Jet; 4], f: &Jet) -> Jet {
    let mut s = x[0] * f.d(0);
    for l in 1..4 {
        s += x[l] * f.d(l);
    }
    s
}

/// Covariant derivative of a frame covector along `x`: `x^λ(∂_λφ_k + K̃_λ^j_k φ_j)`.
fn cov_d(x: &[Jet; 4], phi: &[Jet; 3], kt: &FrameConn, k: usize) -> Jet {
    let mut s = dot_d(x, &phi[k]);
    for l in 0..4 {
        let mut t = kt[l][0][k] * phi[0];
        for j in 1..3 {
            t += kt[l][j][k] * phi[j];
        }
        s += x[l] * t;
    }
    s
}

/// Bracket of two component-jet tuples; the result is one order below the inputs.
pub fn bracket_jets(a: &SfJets, b: &SfJets, ctx: &BracketCtx) -> SfJets {
    let (x, xp) = (a.vector(), b.vector());
    let (fa, fb) = (a.upper(), b.upper());
    let upper: [Jet; 4] = std::array::from_fn(|l| {
        let mut s = fa[0] * fb[l].d(0) - fb[0] * fa[l].d(0);
        for h in 1..4 {
            s += fb[h] * fa[l].d(h) - fa[h] * fb[l].d(h);
        }
        s
    });
    let mut phi_xx = Jet::zero(MAX_ORDER);
    let mut rho_xx = [Jet::zero(MAX_ORDER); 3];
    for l in 0..4 {
        for m in 0..4 {
            let w = x[l] * xp[m];
            phi_xx += w * ctx.phi[l][m];
            for (k, r) in rho_xx.iter_mut().enumerate() {
                *r += w * ctx.rho[l][m][k];
            }
        }
    }
    let fbrev = dot_d(&x, &b.fbrev) - dot_d(&xp, &a.fbrev) + phi_xx;
    let phi: [Jet; 3] = std::array::from_fn(|k| {
        let mut s = -rho_xx[k] + cov_d(&x, &b.phi, &ctx.ktilde, k) - cov_d(&xp, &a.phi, &ctx.ktilde, k);
        for i in 0..3 {
            for j in 0..3 {
                let e = eps(i, j, k);
                if e != 0.0 {
                    s += (b.phi[i] * a.phi[j]).scale(e);
                }
            }
        }
        s
    });
    SfJets { f0: upper[0], fi: [upper[1], upper[2], upper[3]], fbrev, phi }
}

/// Value of the special function at a phase point.
pub fn eval_special(f: &SpecialFunction, bg: &Background, p: &PhasePoint) -> Result<f64> {
    let b = bg.jets(&p.x, 0)?;
    let j = f.jets(&b, 0)?.value();
    let k = bg.phys.k();
    let mut s = j.fbrev;
    for i in 0..3 {
        for l in 0..3 {
            let g = b.g[i][l].value();
            s += j.f0 * 0.5 * k * g * p.v[i] * p.v[l] + j.fi[i] * k * g * p.v[l];
        }
        s += j.phi[i] * p.s[i];
    }
    Ok(s)
}

/// `X[f] = (f⁰, −f^i)` at a point.
pub fn vector_of(f: &SpecialFunction, bg: &Background, p: &EvalPoint) -> Result<[f64; 4]> {
    let b = bg.jets(p, 0)?;
    Ok(f.jets(&b, 0)?.vector().map(|j| j.value()))
}

fn require_reference(o: &Observer) -> Result<()> {
    if o.is_reference() {
        Ok(())
    } else {
        Err(CqmError::NonAdaptedObserver(o.name.clone()))
    }
}

/// Scalar part of the bracket at a point; spin components are left at zero.
pub fn scalar_bracket(f: &SpecialFunction, g: &SpecialFunction, bg: &Background, o: &Observer, p: &EvalPoint) -> Result<SfValue> {
    require_reference(o)?;
    let b = bg.jets(p, 2)?;
    let ctx = BracketCtx::new(&b)?;
    let strip = |s: SfJets| SfJets { phi: [Jet::zero(s.order()); 3], ..s };
    let (a, c) = (strip(f.jets(&b, 1)?), strip(g.jets(&b, 1)?));
    let mut v = bracket_jets(&a, &c, &ctx).value();
    v.phi = [0.0; 3];
    Ok(v)
}

/// Full bracket including the spin part, at a point.
pub fn extended_bracket(f: &SpecialFunction, g: &SpecialFunction, bg: &Background, p: &EvalPoint) -> Result<SfValue> {
    let b = bg.jets(p, 2)?;
    let ctx = BracketCtx::new(&b)?;
    Ok(bracket_jets(&f.jets(&b, 1)?, &g.jets(&b, 1)?, &ctx).value())
}

/// Bracket result kept as jets of order `order` (at most 1).
pub fn extended_bracket_jets(f: &SpecialFunction, g: &SpecialFunction, b: &BgJets, ctx: &BracketCtx, order: usize) -> Result<SfJets> {
    Ok(bracket_jets(&f.jets(b, order + 1)?, &g.jets(b, order + 1)?, ctx))
}

/// Max-norm of the cyclic sum of nested brackets.
pub fn jacobi_residual(f1: &SpecialFunction, f2: &SpecialFunction, f3: &SpecialFunction, bg: &Background, p: &EvalPoint) -> Result<f64> {
    let b = bg.jets(p, 3)?;
    let ctx = BracketCtx::new(&b)?;
    let j = [f1.jets(&b, 3)?, f2.jets(&b, 3)?, f3.jets(&b, 3)?];
    let mut sum = [0.0; 8];
    for (a, c, d) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        let inner = bracket_jets(&j[c], &j[d], &ctx);
        let outer = bracket_jets(&j[a], &inner, &ctx).value().as_array();
        for (s, v) in sum.iter_mut().zip(outer) {
            *s += v;
        }
    }
    Ok(sum.iter().fold(0.0, |m, v| m.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::standard_constants;

    fn bg() -> Background {
        Background::flat(standard_constants(1.0, 1.0, 1.0, 0.5, 1.0).unwrap()).unwrap()
    }

    fn pt(x: [f64; 4]) -> EvalPoint {
        EvalPoint::new(x).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let b = bg();
        let p = PhasePoint::new([0.3, 1.5, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 0.5]).unwrap();
        assert_eq!(eval_special(&SpecialFunction::coordinate(1), &b, &p).unwrap(), 1.5);
        assert_eq!(eval_special(&SpecialFunction::momentum(1), &b, &p).unwrap(), 2.0);
        let s = SpecialFunction::spin(["0", "0", "1"], &b.constants).unwrap();
        assert_eq!(eval_special(&s, &b, &p).unwrap(), 0.5);
    }

    #[test]
    fn vector_examples() {
        let b = bg();
        let p = pt([0.0; 4]);
        assert_eq!(vector_of(&SpecialFunction::coordinate(1), &b, &p).unwrap(), [0.0; 4]);
        assert_eq!(vector_of(&SpecialFunction::momentum(1), &b, &p).unwrap(), [0.0, -1.0, 0.0, 0.0]);
        assert_eq!(vector_of(&SpecialFunction::energy(), &b, &p).unwrap(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn canonical_pair() {
        let b = bg().with_potential(1, "0.3*x2").unwrap();
        let p = pt([0.1, 0.2, 0.3, 0.4]);
        let v = scalar_bracket(&SpecialFunction::coordinate(1), &SpecialFunction::momentum(1), &b, &Observer::reference(), &p).unwrap();
        assert_eq!(v, SfValue { f0: 0.0, fi: [0.0; 3], fbrev: 1.0, phi: [0.0; 3] });
        let v = scalar_bracket(&SpecialFunction::coordinate(1), &SpecialFunction::coordinate(2), &b, &Observer::reference(), &p).unwrap();
        assert_eq!(v.as_array(), [0.0; 8]);
    }

    #[test]
    fn force_term() {
        let b = bg().with_f(0, 1, "0.7").unwrap();
        let v = scalar_bracket(&SpecialFunction::energy(), &SpecialFunction::momentum(1), &b, &Observer::reference(), &pt([0.0; 4])).unwrap();
        assert!((v.fbrev + 0.7).abs() < 1e-15);
    }

    #[test]
    fn spin_cross_product() {
        let b = bg();
        let f = SpecialFunction::spin(["1", "0", "0"], &b.constants).unwrap();
        let g = SpecialFunction::spin(["0", "1", "0"], &b.constants).unwrap();
        let v = extended_bracket(&f, &g, &b, &pt([0.0; 4])).unwrap();
        assert_eq!(v.phi, [0.0, 0.0, -1.0]);
    }

    #[test]
    fn non_adapted_observer_rejected() {
        let b = bg();
        let o = Observer::parse("boost", ["0.1", "0", "0"], &b.constants).unwrap();
        let f = SpecialFunction::coordinate(1);
        assert!(matches!(scalar_bracket(&f, &f, &b, &o, &pt([0.0; 4])), Err(CqmError::NonAdaptedObserver(_))));
    }
}
