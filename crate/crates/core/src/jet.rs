//! Truncated Taylor jets in the four chart variables, order at most 3.
//!
//! Coefficients live in a dense array of 35 slots, one per multi-index
//! `α = (α0, α1, α2, α3)` with `|α| ≤ 3`, in ascending lexicographic order:
//! `(0,0,0,0), (0,0,0,1), (0,0,0,2), (0,0,0,3), (0,0,1,0), …, (3,0,0,0)`.
//! The slot for `α` holds `∂^α f / α!` at the base point. Slots above the
//! jet's order are always zero.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{CqmError, Result};

pub const NVARS: usize = 4;
pub const MAX_ORDER: usize = 3;
pub const NCOEFF: usize = 35;

pub type MultiIndex = [u8; NVARS];

struct Layout {
    alphas: [MultiIndex; NCOEFF],
    degree: [u8; NCOEFF],
    lookup: [[[[u8; 4]; 4]; 4]; 4],
    /// `(i, j, k)` with `α_i + α_j = α_k`, sorted by `|α_k|`.
    mul: Vec<(u8, u8, u8)>,
    /// `mul_end[d]` is the number of triples with `|α_k| ≤ d`.
    mul_end: [usize; MAX_ORDER + 1],
    /// For each variable and result slot `k`: source slot and factor `α_v + 1`.
    deriv: [[(u8, f64); NCOEFF]; NVARS],
}

const NONE: u8 = u8::MAX;

fn layout() -> &'static Layout {
    static L: OnceLock<Layout> = OnceLock::new();
    L.get_or_init(|| {
        let mut alphas = [[0u8; 4]; NCOEFF];
        let mut degree = [0u8; NCOEFF];
        let mut lookup = [[[[NONE; 4]; 4]; 4]; 4];
        let mut n = 0;
        for a in 0..4u8 {
            for b in 0..4u8 {
                for c in 0..4u8 {
                    for d in 0..4u8 {
                        if (a + b + c + d) as usize <= MAX_ORDER {
                            alphas[n] = [a, b, c, d];
                            degree[n] = a + b + c + d;
                            lookup[a as usize][b as usize][c as usize][d as usize] = n as u8;
                            n += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(n, NCOEFF);
        let mut mul = Vec::new();
        for i in 0..NCOEFF {
            for j in 0..NCOEFF {
                if (degree[i] + degree[j]) as usize <= MAX_ORDER {
                    let s: Vec<usize> = (0..4).map(|v| (alphas[i][v] + alphas[j][v]) as usize).collect();
                    let k = lookup[s[0]][s[1]][s[2]][s[3]];
                    mul.push((i as u8, j as u8, k));
                }
            }
        }
        mul.sort_by_key(|&(_, _, k)| degree[k as usize]);
        let mut mul_end = [0usize; MAX_ORDER + 1];
        for (d, end) in mul_end.iter_mut().enumerate() {
            *end = mul.iter().filter(|&&(_, _, k)| degree[k as usize] as usize <= d).count();
        }
        let mut deriv = [[(NONE, 0.0); NCOEFF]; NVARS];
        for (v, table) in deriv.iter_mut().enumerate() {
            for k in 0..NCOEFF {
                if (degree[k] as usize) < MAX_ORDER {
                    let mut a = alphas[k];
                    a[v] += 1;
                    let src = lookup[a[0] as usize][a[1] as usize][a[2] as usize][a[3] as usize];
                    table[k] = (src, a[v] as f64);
                }
            }
        }
        Layout { alphas, degree, lookup, mul, mul_end, deriv }
    })
}

/// Slot of a multi-index in the dense layout, if `|α| ≤ 3`.
pub fn slot(alpha: MultiIndex) -> Option<usize> {
    if alpha.iter().map(|&a| a as usize).sum::<usize>() > MAX_ORDER {
        return None;
    }
    let s = layout().lookup[alpha[0] as usize][alpha[1] as usize][alpha[2] as usize][alpha[3] as usize];
    (s != NONE).then_some(s as usize)
}

/// Multi-index stored in a slot.
pub fn multi_index(slot: usize) -> MultiIndex {
    layout().alphas[slot]
}

fn factorial(alpha: MultiIndex) -> f64 {
    alpha.iter().map(|&a| (1..=a as u32).product::<u32>() as f64).product()
}

/// Base point of a jet expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalPoint {
    pub x: [f64; 4],
}

impl EvalPoint {
    pub fn new(x: [f64; 4]) -> Result<EvalPoint> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CqmError::NonFinite(format!("{x:?}")));
        }
        Ok(EvalPoint { x })
    }
}

/// Real jet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    c: [f64; NCOEFF],
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        Err(CqmError::OrderOutOfRange(order))
    } else {
        Ok(())
    }
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Jet {
        let mut c = [0.0; NCOEFF];
        c[0] = value;
        Jet { order: order.min(MAX_ORDER), c }
    }

    pub fn zero(order: usize) -> Jet {
        Jet::constant(0.0, order)
    }

    /// Jet of the coordinate function `x^var` at `point`.
    pub fn seed(point: &EvalPoint, var: usize, order: usize) -> Result<Jet> {
        check_order(order)?;
        if var >= NVARS {
            return Err(CqmError::Domain(format!("variable index {var}")));
        }
        let mut j = Jet::constant(point.x[var], order);
        if order >= 1 {
            let mut a = [0u8; 4];
            a[var] = 1;
            j.c[slot(a).unwrap()] = 1.0;
        }
        Ok(j)
    }

    /// Builds a jet from raw Taylor coefficients. Slots above `order` are cleared.
    pub fn from_coeffs(coeffs: [f64; NCOEFF], order: usize) -> Result<Jet> {
        check_order(order)?;
        let mut j = Jet { order, c: coeffs };
        j.clear_above();
        Ok(j)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64; NCOEFF] {
        &self.c
    }

    /// Taylor coefficient `∂^α f / α!`.
    pub fn coeff(&self, alpha: MultiIndex) -> Result<f64> {
        let deg: usize = alpha.iter().map(|&a| a as usize).sum();
        if deg > self.order {
            return Err(CqmError::OrderOutOfRange(deg));
        }
        Ok(self.c[slot(alpha).unwrap()])
    }

    /// Partial derivative `∂^α f` at the base point.
    pub fn derivative(&self, alpha: MultiIndex) -> Result<f64> {
        Ok(self.coeff(alpha)? * factorial(alpha))
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let mut j = *self;
        j.order = order.min(self.order);
        j.clear_above();
        j
    }

    fn clear_above(&mut self) {
        let deg = &layout().degree;
        for k in 0..NCOEFF {
            if deg[k] as usize > self.order {
                self.c[k] = 0.0;
            }
        }
    }

    /// Partial derivative jet `∂_var f`, one order lower.
    ///
    /// # Panics
    /// If the jet has order 0; callers track orders so this is a logic error.
    pub fn d(&self, var: usize) -> Jet {
        assert!(self.order > 0, "derivative of an order-0 jet");
        let l = layout();
        let mut out = Jet::zero(self.order - 1);
        for k in 0..NCOEFF {
            if l.degree[k] as usize <= out.order {
                let (src, f) = l.deriv[var][k];
                out.c[k] = f * self.c[src as usize];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut j = *self;
        for v in j.c.iter_mut() {
            *v *= s;
        }
        j
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut j = *self;
        j.c[0] += s;
        j
    }

    fn binary_linear(&self, o: &Jet, sign: f64) -> Jet {
        let order = self.order.min(o.order);
        let mut j = Jet::zero(order);
        for k in 0..NCOEFF {
            j.c[k] = self.c[k] + sign * o.c[k];
        }
        j.clear_above();
        j
    }

    fn product(&self, o: &Jet) -> Jet {
        let l = layout();
        let order = self.order.min(o.order);
        let mut j = Jet::zero(order);
        for &(a, b, k) in &l.mul[..l.mul_end[order]] {
            j.c[k as usize] += self.c[a as usize] * o.c[b as usize];
        }
        j
    }

    /// `Σ_n f_n h^n / n!` with `h = self − value` and `f_n` the derivatives of `f` at the value.
    fn compose(&self, f: [f64; MAX_ORDER + 1]) -> Jet {
        let mut h = *self;
        h.c[0] = 0.0;
        let mut out = Jet::constant(f[0], self.order);
        let mut p = h;
        let mut fact = 1.0;
        for (n, fn_) in f.iter().enumerate().skip(1) {
            if n > self.order {
                break;
            }
            fact *= n as f64;
            out += p.scale(fn_ / fact);
            p = p.product(&h);
        }
        out
    }

    pub fn recip(&self) -> Result<Jet> {
        let a = self.value();
        if a == 0.0 {
            return Err(CqmError::Domain("division by a jet with zero value".into()));
        }
        let i = 1.0 / a;
        Ok(self.compose([i, -i * i, 2.0 * i * i * i, -6.0 * i * i * i * i]))
    }

    pub fn try_div(&self, o: &Jet) -> Result<Jet> {
        Ok(*self * o.recip()?)
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a = self.value();
        if a <= 0.0 {
            return Err(CqmError::Domain(format!("sqrt of nonpositive value {a}")));
        }
        let s = a.sqrt();
        Ok(self.compose([s, 0.5 / s, -0.25 / (s * a), 0.375 / (s * a * a)]))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose([e; 4])
    }

    pub fn ln(&self) -> Result<Jet> {
        let a = self.value();
        if a <= 0.0 {
            return Err(CqmError::Domain(format!("log of nonpositive value {a}")));
        }
        Ok(self.compose([a.ln(), 1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a)]))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn powi(&self, n: i32) -> Result<Jet> {
        if n >= 0 {
            let mut out = Jet::constant(1.0, self.order);
            for _ in 0..n {
                out = out * *self;
            }
            Ok(out)
        } else {
            self.recip()?.powi(-n)
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        self.binary_linear(&o, 1.0)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self.binary_linear(&o, -1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        self.product(&o)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.scale(s)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, o: Jet) {
        *self = *self - o;
    }
}

/// Elementary operation selector for [`jet_apply`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetFn {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    PowInt(i32),
}

/// Applies `f` to one or two jets. Binary operations require `b`.
pub fn jet_apply(a: &Jet, b: Option<&Jet>, f: JetFn) -> Result<Jet> {
    let need = || b.copied().ok_or_else(|| CqmError::Domain("missing second operand".into()));
    Ok(match f {
        JetFn::Add => *a + need()?,
        JetFn::Sub => *a - need()?,
        JetFn::Mul => *a * need()?,
        JetFn::Div => a.try_div(&need()?)?,
        JetFn::Neg => -*a,
        JetFn::Sqrt => a.sqrt()?,
        JetFn::Exp => a.exp(),
        JetFn::Log => a.ln()?,
        JetFn::Sin => a.sin(),
        JetFn::Cos => a.cos(),
        JetFn::PowInt(n) => a.powi(n)?,
    })
}

/// Complex jet as a pair of real jets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CJet {
    pub re: Jet,
    pub im: Jet,
}

impl CJet {
    pub fn new(re: Jet, im: Jet) -> CJet {
        CJet { re, im }
    }

    pub fn real(re: Jet) -> CJet {
        let im = Jet::zero(re.order());
        CJet { re, im }
    }

    pub fn imag(im: Jet) -> CJet {
        let re = Jet::zero(im.order());
        CJet { re, im }
    }

    pub fn constant(z: Complex64, order: usize) -> CJet {
        CJet { re: Jet::constant(z.re, order), im: Jet::constant(z.im, order) }
    }

    pub fn zero(order: usize) -> CJet {
        CJet::constant(Complex64::new(0.0, 0.0), order)
    }

    pub fn order(&self) -> usize {
        self.re.order().min(self.im.order())
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }

    pub fn conj(&self) -> CJet {
        CJet { re: self.re, im: -self.im }
    }

    pub fn d(&self, var: usize) -> CJet {
        CJet { re: self.re.d(var), im: self.im.d(var) }
    }

    pub fn scale(&self, z: Complex64) -> CJet {
        CJet { re: self.re.scale(z.re) - self.im.scale(z.im), im: self.re.scale(z.im) + self.im.scale(z.re) }
    }

    pub fn mul_real(&self, r: &Jet) -> CJet {
        CJet { re: self.re * *r, im: self.im * *r }
    }

    pub fn exp(&self) -> CJet {
        let e = self.re.exp();
        CJet { re: e * self.im.cos(), im: e * self.im.sin() }
    }
}

impl Add for CJet {
    type Output = CJet;
    fn add(self, o: CJet) -> CJet {
        CJet { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for CJet {
    type Output = CJet;
    fn sub(self, o: CJet) -> CJet {
        CJet { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for CJet {
    type Output = CJet;
    fn mul(self, o: CJet) -> CJet {
        CJet { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
}

impl Neg for CJet {
    type Output = CJet;
    fn neg(self) -> CJet {
        CJet { re: -self.re, im: -self.im }
    }
}

impl AddAssign for CJet {
    fn add_assign(&mut self, o: CJet) {
        *self = *self + o;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: [f64; 4]) -> EvalPoint {
        EvalPoint::new(x).unwrap()
    }

    #[test]
    fn layout_is_lexicographic() {
        assert_eq!(multi_index(0), [0, 0, 0, 0]);
        assert_eq!(multi_index(1), [0, 0, 0, 1]);
        assert_eq!(multi_index(3), [0, 0, 0, 3]);
        assert_eq!(multi_index(4), [0, 0, 1, 0]);
        assert_eq!(multi_index(NCOEFF - 1), [3, 0, 0, 0]);
        for k in 1..NCOEFF {
            assert!(multi_index(k - 1) < multi_index(k));
        }
    }

    #[test]
    fn seed_examples() {
        let p = pt([0.0, 1.0, 2.0, 3.0]);
        let j = Jet::seed(&p, 2, 1).unwrap();
        assert_eq!(j.value(), 2.0);
        assert_eq!(j.derivative([0, 0, 1, 0]).unwrap(), 1.0);
        assert_eq!(j.derivative([0, 1, 0, 0]).unwrap(), 0.0);
        let j0 = Jet::seed(&p, 2, 0).unwrap();
        assert!(j0.derivative([0, 0, 1, 0]).is_err());
        let j2 = Jet::seed(&p, 1, 2).unwrap();
        assert_eq!(j2.derivative([0, 2, 0, 0]).unwrap(), 0.0);
        assert!(Jet::seed(&p, 1, 4).is_err());
    }

    #[test]
    fn square_at_three() {
        let x = Jet::seed(&pt([0.0, 3.0, 0.0, 0.0]), 1, 2).unwrap();
        let y = x * x;
        assert_eq!(y.value(), 9.0);
        assert_eq!(y.derivative([0, 1, 0, 0]).unwrap(), 6.0);
        assert_eq!(y.coeff([0, 2, 0, 0]).unwrap(), 1.0);
        assert_eq!(y.derivative([0, 2, 0, 0]).unwrap(), 2.0);
    }

    #[test]
    fn exp_of_zero_constant() {
        let j = Jet::constant(0.0, 0).exp();
        assert_eq!(j.value(), 1.0);
        assert_eq!(j.order(), 0);
    }

    #[test]
    fn extract_examples() {
        let p = pt([0.0, 0.7, -1.2, 0.0]);
        let x1 = Jet::seed(&p, 1, 3).unwrap();
        let x2 = Jet::seed(&p, 2, 3).unwrap();
        assert_eq!((x1 * x2).derivative([0, 1, 1, 0]).unwrap(), 1.0);
        assert!(((x1 * x1 * x1).derivative([0, 3, 0, 0]).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let z = Jet::constant(0.0, 2);
        assert!(z.recip().is_err());
        assert!(z.sqrt().is_err());
        assert!(Jet::constant(-1.0, 2).ln().is_err());
        assert!(jet_apply(&z, None, JetFn::Add).is_err());
    }

    #[test]
    fn derivative_jet_shifts() {
        let p = pt([0.3, 0.5, 0.0, 0.0]);
        let x0 = Jet::seed(&p, 0, 3).unwrap();
        let x1 = Jet::seed(&p, 1, 3).unwrap();
        let f = x0 * x1 * x1;
        let fx1 = f.d(1);
        assert_eq!(fx1.order(), 2);
        assert!((fx1.value() - 2.0 * 0.3 * 0.5).abs() < 1e-15);
        assert!((fx1.derivative([1, 0, 0, 0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complex_exp_matches_euler() {
        let p = pt([0.0, 0.4, 0.0, 0.0]);
        let th = Jet::seed(&p, 1, 3).unwrap();
        let z = CJet::imag(th).exp();
        assert!((z.value() - Complex64::new(0.4f64.cos(), 0.4f64.sin())).norm() < 1e-15);
        assert!((z.re.derivative([0, 1, 0, 0]).unwrap() + 0.4f64.sin()).abs() < 1e-15);
    }
}
