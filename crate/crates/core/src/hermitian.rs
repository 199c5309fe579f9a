//! Linear projectable vector fields on the rank-2 spinor bundle and their correspondence
//! with special phase functions.

use num_complex::Complex64;

use crate::background::{Background, BgJets, Coupling, Observer};
use crate::error::{CqmError, Result};
use crate::expr::FieldDef;
use crate::jet::{CJet, EvalPoint, Jet, MAX_ORDER};
use crate::pauli::{pauli_unmap, spin_connection_from, xi, SpinConn, SpinMatrix};
use crate::special::{BracketCtx, SfJets, SfValue, SpecialFunction};

/// 2×2 matrix of complex jets.
pub type CMat = [[CJet; 2]; 2];

const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn cm_zero(order: usize) -> CMat {
    [[CJet::zero(order); 2]; 2]
}

/// `coef · m` for a constant matrix.
pub fn cm_scaled(m: &SpinMatrix, coef: &Jet) -> CMat {
    std::array::from_fn(|a| std::array::from_fn(|b| CJet::real(*coef).scale(m[(a, b)])))
}

pub fn cm_add(a: &CMat, b: &CMat) -> CMat {
    std::array::from_fn(|r| std::array::from_fn(|c| a[r][c] + b[r][c]))
}

pub fn cm_sub(a: &CMat, b: &CMat) -> CMat {
    std::array::from_fn(|r| std::array::from_fn(|c| a[r][c] - b[r][c]))
}

pub fn cm_mul(a: &CMat, b: &CMat) -> CMat {
    std::array::from_fn(|r| std::array::from_fn(|c| a[r][0] * b[0][c] + a[r][1] * b[1][c]))
}

pub fn cm_commutator(a: &CMat, b: &CMat) -> CMat {
    cm_sub(&cm_mul(a, b), &cm_mul(b, a))
}

fn cm_real_mul(a: &CMat, r: &Jet) -> CMat {
    a.map(|row| row.map(|z| z.mul_real(r)))
}

fn cm_d(a: &CMat, l: usize) -> CMat {
    a.map(|row| row.map(|z| z.d(l)))
}

pub fn cm_value(a: &CMat) -> SpinMatrix {
    SpinMatrix::new(a[0][0].value(), a[0][1].value(), a[1][0].value(), a[1][1].value())
}

/// `Σ_λ x^λ ∂_λ m`.
fn cm_along(x: &[Jet; 4], m: &CMat) -> CMat {
    let mut s = cm_real_mul(&cm_d(m, 0), &x[0]);
    for l in 1..4 {
        s = cm_add(&s, &cm_real_mul(&cm_d(m, l), &x[l]));
    }
    s
}

/// A vector field `X` together with its matrix part, as jets at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HJets {
    pub x: [Jet; 4],
    pub y: CMat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Raw,
    FromSpecial,
}

impl HJets {
    pub fn order(&self) -> usize {
        let xo = self.x.iter().map(|j| j.order()).min().unwrap();
        self.y.iter().flatten().map(|z| z.order()).min().unwrap().min(xo)
    }

    pub fn x_value(&self) -> [f64; 4] {
        self.x.map(|j| j.value())
    }

    pub fn y_value(&self) -> SpinMatrix {
        cm_value(&self.y)
    }

    /// Max componentwise difference of values.
    pub fn max_abs_diff(&self, o: &HJets) -> f64 {
        let dx = self.x_value().iter().zip(o.x_value()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dy = (self.y_value() - o.y_value()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        dx.max(dy)
    }
}

/// A raw field recipe: chart components `X^λ` and `Ymat = Y^λ ξ_λ + d·1`.
#[derive(Clone, Debug)]
pub struct HermitianField {
    pub x: [FieldDef; 4],
    pub y: [FieldDef; 4],
    pub identity: FieldDef,
}

impl HermitianField {
    pub fn jets(&self, p: &EvalPoint, order: usize) -> Result<HJets> {
        let mut x = [Jet::zero(order); 4];
        let mut y = cm_scaled(&SpinMatrix::identity(), &self.identity.eval(p, order)?);
        for l in 0..4 {
            x[l] = self.x[l].eval(p, order)?;
            y = cm_add(&y, &cm_scaled(&xi(l), &self.y[l].eval(p, order)?));
        }
        Ok(HJets { x, y })
    }
}

/// `Y.ψ = X^λ∂_λψ − Ymat ψ` at the base point.
pub fn act_on_section(h: &HJets, psi: &[CJet; 2]) -> [Complex64; 2] {
    std::array::from_fn(|a| {
        let mut s = Complex64::new(0.0, 0.0);
        for l in 0..4 {
            s += psi[a].d(l).value() * h.x[l].value();
        }
        s - h.y[a][0].value() * psi[0].value() - h.y[a][1].value() * psi[1].value()
    })
}

/// Lie bracket `([X,X′], X∂Y′ − X′∂Y + Y′Y − YY′)`, one order below the inputs.
pub fn lie_bracket_y(a: &HJets, b: &HJets) -> HJets {
    let x = std::array::from_fn(|l| {
        let mut s = a.x[0] * b.x[l].d(0) - b.x[0] * a.x[l].d(0);
        for m in 1..4 {
            s += a.x[m] * b.x[l].d(m) - b.x[m] * a.x[l].d(m);
        }
        s
    });
    let z = cm_sub(&cm_along(&a.x, &b.y), &cm_along(&b.x, &a.y));
    let z = cm_add(&z, &cm_sub(&cm_mul(&b.y, &a.y), &cm_mul(&a.y, &b.y)));
    HJets { x, y: z }
}

/// `div_η X = (X⁰∂₀√g + ∂_i(X^i√g))/√g`, one order below.
pub fn divergence_jets(x: &[Jet; 4], sqrtg: &Jet) -> Result<Jet> {
    let mut s = x[0] * sqrtg.d(0);
    for i in 1..4 {
        s += (x[i] * *sqrtg).d(i);
    }
    s.try_div(&sqrtg.truncate(s.order()))
}

/// Numeric `div_η X` for field-language components.
pub fn divergence_eta(x: &[FieldDef; 4], bg: &Background, p: &EvalPoint) -> Result<f64> {
    let b = bg.jets(p, 1)?;
    let xs = [x[0].eval(p, 1)?, x[1].eval(p, 1)?, x[2].eval(p, 1)?, x[3].eval(p, 1)?];
    Ok(divergence_jets(&xs, &b.sqrtg)?.value())
}

/// Background data for the Hermitian sector at one point.
#[derive(Clone, Debug)]
pub struct HCtx {
    pub b: BgJets,
    /// Moment-joined spin connection, one order below the fields.
    pub c: SpinConn,
    /// `c_λ = i A_λ 1 + C_λ^i ξ_i` on the reference observer.
    pub conn: [CMat; 4],
    pub bracket: Option<BracketCtx>,
}

impl HCtx {
    /// Field order `order` (≥ 1); the bracket context needs `order ≥ 2`.
    pub fn new(bg: &Background, p: &EvalPoint, order: usize) -> Result<HCtx> {
        let b = bg.jets(p, order.min(MAX_ORDER))?;
        let c = spin_connection_from(&b, Coupling::Moment)?;
        let conn = std::array::from_fn(|l| connection_matrix(&b.a[l], &c[l]));
        let bracket = if b.order >= 2 { Some(BracketCtx::new(&b)?) } else { None };
        Ok(HCtx { b, c, conn, bracket })
    }

    pub fn bracket_ctx(&self) -> Result<&BracketCtx> {
        self.bracket.as_ref().ok_or(CqmError::OrderOutOfRange(self.b.order))
    }

    /// `R[c]_{λμ} = −iΦ_{λμ}·1 + ρ_{λμ}^k ξ_k`.
    pub fn curvature(&self) -> Result<[[CMat; 4]; 4]> {
        let ctx = self.bracket_ctx()?;
        let n = ctx.rho[0][0][0].order();
        let mut out = [[cm_zero(n); 4]; 4];
        for l in 0..4 {
            for m in 0..4 {
                let mut r = cm_scaled(&(SpinMatrix::identity() * -I), &ctx.phi[l][m]);
                for k in 0..3 {
                    r = cm_add(&r, &cm_scaled(&xi(k + 1), &ctx.rho[l][m][k]));
                }
                out[l][m] = r;
            }
        }
        Ok(out)
    }
}

fn connection_matrix(a: &Jet, c: &[Jet; 3]) -> CMat {
    let mut m = cm_scaled(&(SpinMatrix::identity() * I), a);
    for k in 0..3 {
        m = cm_add(&m, &cm_scaled(&xi(k + 1), &c[k]));
    }
    m
}

/// `Ch₀ = −(m u⁰/2ℏ) g_ij v^i v^j + A₀`, `Ch_i = (m u⁰/ℏ) g_ij v^j + A_i`, along velocity jets `v`.
pub fn ch_along(b: &BgJets, v: &[Jet; 3]) -> [Jet; 4] {
    let k = b.phys.k();
    let mut ch = b.a;
    for i in 0..3 {
        for j in 0..3 {
            let gv = b.g[i][j] * v[j];
            ch[0] -= (gv * v[i]).scale(0.5 * k);
            ch[i + 1] += gv.scale(k);
        }
    }
    ch
}

/// `X ⌟ c` for the reference observer, or along `o` when given.
pub fn connection_lift(x: &[Jet; 4], ctx: &HCtx, o: Option<&[Jet; 3]>) -> HJets {
    let conn = match o {
        None => ctx.conn,
        Some(v) => {
            let ch = ch_along(&ctx.b, v);
            std::array::from_fn(|l| connection_matrix(&ch[l], &ctx.c[l]))
        }
    };
    let mut y = cm_real_mul(&conn[0], &x[0]);
    for l in 1..4 {
        y = cm_add(&y, &cm_real_mul(&conn[l], &x[l]));
    }
    HJets { x: *x, y }
}

/// `Y̌ = Ymat − X^λ c_λ`.
pub fn vertical_projection(h: &HJets, ctx: &HCtx, o: Option<&[Jet; 3]>) -> CMat {
    cm_sub(&h.y, &connection_lift(&h.x, ctx, o).y)
}

/// Pair bracket `([X,X′], −R(X,X′) + ∇_XY̌′ − ∇_{X′}Y̌ + [Y̌′,Y̌])`.
pub fn pair_bracket(a: (&[Jet; 4], &CMat), b: (&[Jet; 4], &CMat), ctx: &HCtx) -> Result<([Jet; 4], CMat)> {
    let (x, ya) = a;
    let (xp, yb) = b;
    let r = ctx.curvature()?;
    let cov = |v: &[Jet; 4], m: &CMat| {
        let mut s = cm_along(v, m);
        for l in 0..4 {
            s = cm_sub(&s, &cm_real_mul(&cm_commutator(&ctx.conn[l], m), &v[l]));
        }
        s
    };
    let mut rxx = cm_zero(MAX_ORDER);
    for l in 0..4 {
        for m in 0..4 {
            rxx = cm_add(&rxx, &cm_real_mul(&r[l][m], &(x[l] * xp[m])));
        }
    }
    let mut out = cm_sub(&cov(x, yb), &cov(xp, ya));
    out = cm_sub(&out, &rxx);
    out = cm_add(&out, &cm_commutator(yb, ya));
    let xb = lie_bracket_y(&HJets { x: *x, y: *ya }, &HJets { x: *xp, y: *yb }).x;
    Ok((xb, out))
}

/// Field of a special function: `X⁰ = f⁰`, `X^i = −f^i`,
/// `Ymat = i(f⁰A₀ − f^jA_j + f̆)·1 + (X^λC_λ^i + φ^i)ξ_i − ½ div_η(X)·1`.
pub fn from_special_jets(f: &SfJets, ctx: &HCtx) -> Result<HJets> {
    let b = &ctx.b;
    let x = f.vector();
    let mut y0 = f.f0 * b.a[0] + f.fbrev;
    for j in 0..3 {
        y0 -= f.fi[j] * b.a[j + 1];
    }
    let mut y = cm_scaled(&(SpinMatrix::identity() * I), &y0);
    for i in 0..3 {
        let mut yi = f.phi[i];
        for l in 0..4 {
            yi += x[l] * ctx.c[l][i];
        }
        y = cm_add(&y, &cm_scaled(&xi(i + 1), &yi));
    }
    let div = divergence_jets(&x, &b.sqrtg)?;
    y = cm_add(&y, &cm_scaled(&SpinMatrix::identity(), &div.scale(-0.5)));
    Ok(HJets { x, y })
}

pub fn from_special(f: &SpecialFunction, ctx: &HCtx, order: usize) -> Result<HJets> {
    from_special_jets(&f.jets(&ctx.b, order)?, ctx)
}

/// Recovers the special-function components at the base point.
pub fn to_special(h: &HJets, ctx: &HCtx, provenance: Provenance) -> Result<SfValue> {
    let mut y = h.y;
    if provenance == Provenance::FromSpecial {
        let div = divergence_jets(&h.x, &ctx.b.sqrtg)?;
        y = cm_add(&y, &cm_scaled(&SpinMatrix::identity(), &div.scale(0.5)));
    }
    let yv = cm_value(&y);
    let herm = (yv + yv.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-10 * yv.iter().map(|z| z.norm()).fold(1.0, f64::max) {
        return Err(CqmError::NotHermitian(herm));
    }
    let x = h.x_value();
    let lift = cm_value(&connection_lift(&h.x, ctx, None).y);
    let check = yv - lift;
    let tr = check.trace();
    let fbrev = (-0.5 * I * tr).re;
    let traceless = check - SpinMatrix::identity() * (tr * 0.5);
    let traceless = (traceless - traceless.adjoint()) * Complex64::new(0.5, 0.0);
    let phi = pauli_unmap(&traceless)?;
    Ok(SfValue { f0: x[0], fi: [-x[1], -x[2], -x[3]], fbrev, phi })
}

/// Plain Hermiticity residual `‖Y + Y†‖`.
pub fn plain_residual(h: &HJets) -> f64 {
    let y = h.y_value();
    (y + y.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// η-modified residual `‖Y + Y† + div_η(X)·1‖`.
pub fn eta_residual(h: &HJets, sqrtg: &Jet) -> Result<f64> {
    let y = h.y_value();
    let d = divergence_jets(&h.x, sqrtg)?.value();
    Ok((y + y.adjoint() + SpinMatrix::identity() * Complex64::new(d, 0.0)).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// `f⁰Ch₀(o) − f^jCh_j(o) + f(o)`: the observer-independent combination.
pub fn invariant_combination(f: &SpecialFunction, bg: &Background, o: &Observer, p: &EvalPoint) -> Result<f64> {
    let b = bg.jets(p, 0)?;
    let v = o.eval(p, 0)?;
    let ch = ch_along(&b, &v);
    let s = f.jets(&b, 0)?.value();
    let k = b.phys.k();
    let vv = v.map(|j| j.value());
    let mut fo = s.fbrev;
    for i in 0..3 {
        for j in 0..3 {
            let g = b.g[i][j].value();
            fo += s.f0 * 0.5 * k * g * vv[i] * vv[j] + s.fi[i] * k * g * vv[j];
        }
    }
    let mut out = s.f0 * ch[0].value() + fo;
    for j in 0..3 {
        out -= s.fi[j] * ch[j + 1].value();
    }
    Ok(out)
}
