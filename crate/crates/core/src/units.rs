//! Unit spaces as rational exponent triples over length, time and mass.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::Rational64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CqmError, Result};

/// Exponents of 𝕃, 𝕋 and 𝕄. Equality is exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Dim {
    pub l: Rational64,
    pub t: Rational64,
    pub m: Rational64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    Product,
    Quotient,
}

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

impl Dim {
    pub const NONE: Dim = Dim { l: Rational64::new_raw(0, 1), t: Rational64::new_raw(0, 1), m: Rational64::new_raw(0, 1) };

    pub fn new(l: Rational64, t: Rational64, m: Rational64) -> Dim {
        Dim { l, t, m }
    }

    /// Integer exponents.
    pub fn ints(l: i64, t: i64, m: i64) -> Dim {
        Dim::new(r(l, 1), r(t, 1), r(m, 1))
    }

    pub fn length() -> Dim {
        Dim::ints(1, 0, 0)
    }

    pub fn time() -> Dim {
        Dim::ints(0, 1, 0)
    }

    pub fn mass() -> Dim {
        Dim::ints(0, 0, 1)
    }

    /// Planck's constant, 𝕄𝕃²𝕋⁻¹.
    pub fn hbar() -> Dim {
        Dim::ints(2, -1, 1)
    }

    /// Magnetic moment coupling, 𝕋⁻¹𝕃^{3/2}𝕄^{-1/2}.
    pub fn mu() -> Dim {
        Dim::new(r(3, 2), r(-1, 1), r(-1, 2))
    }

    /// Magnetic field, 𝕃^{-5/2}𝕄^{1/2}.
    pub fn magnetic() -> Dim {
        Dim::new(r(-5, 2), r(0, 1), r(1, 2))
    }

    /// Electromagnetic 2-form, (𝕄𝕃)^{1/2}.
    pub fn em_form() -> Dim {
        Dim::new(r(1, 2), r(0, 1), r(1, 2))
    }

    /// Charge, (𝕄𝕃)^{1/2}𝕋⁻¹ so that qF/m is a rate.
    pub fn charge() -> Dim {
        Dim::new(r(1, 2), r(-1, 1), r(1, 2))
    }

    pub fn is_dimensionless(&self) -> bool {
        *self == Dim::NONE
    }

    pub fn combine(self, other: Dim, mode: Combine) -> Dim {
        match mode {
            Combine::Product => Dim::new(self.l + other.l, self.t + other.t, self.m + other.m),
            Combine::Quotient => Dim::new(self.l - other.l, self.t - other.t, self.m - other.m),
        }
    }

    pub fn pow(self, p: Rational64) -> Dim {
        Dim::new(self.l * p, self.t * p, self.m * p)
    }
}

impl Mul for Dim {
    type Output = Dim;
    fn mul(self, rhs: Dim) -> Dim {
        self.combine(rhs, Combine::Product)
    }
}

impl Div for Dim {
    type Output = Dim;
    fn div(self, rhs: Dim) -> Dim {
        self.combine(rhs, Combine::Quotient)
    }
}

fn fmt_ratio(x: Rational64) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

fn parse_ratio(s: &str) -> std::result::Result<Rational64, String> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: i64 = n.parse().map_err(|_| format!("bad rational '{s}'"))?;
    let d: i64 = d.parse().map_err(|_| format!("bad rational '{s}'"))?;
    if d == 0 {
        return Err(format!("zero denominator in '{s}'"));
    }
    Ok(Rational64::new(n, d))
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L^{} T^{} M^{}", self.l, self.t, self.m)
    }
}

#[derive(Serialize, Deserialize)]
struct DimRepr {
    l: String,
    t: String,
    m: String,
}

impl Serialize for Dim {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DimRepr { l: fmt_ratio(self.l), t: fmt_ratio(self.t), m: fmt_ratio(self.m) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dim {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Dim, D::Error> {
        let repr = DimRepr::deserialize(d)?;
        let p = |s: &str| parse_ratio(s).map_err(serde::de::Error::custom);
        Ok(Dim::new(p(&repr.l)?, p(&repr.t)?, p(&repr.m)?))
    }
}

/// A finite real tagged with a dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledReal {
    value: f64,
    dim: Dim,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ScaledReal {
    pub fn new(value: f64, dim: Dim) -> Result<ScaledReal> {
        if !value.is_finite() {
            return Err(CqmError::NonFinite(format!("{value} [{dim}]")));
        }
        Ok(ScaledReal { value, dim })
    }

    pub fn dimensionless(value: f64) -> Result<ScaledReal> {
        ScaledReal::new(value, Dim::NONE)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn apply(self, other: ScaledReal, op: ArithOp) -> Result<ScaledReal> {
        match op {
            ArithOp::Add | ArithOp::Sub => {
                if self.dim != other.dim {
                    return Err(CqmError::DimensionMismatch {
                        context: if op == ArithOp::Add { "add" } else { "sub" }.into(),
                        left: self.dim,
                        right: other.dim,
                    });
                }
                let v = if op == ArithOp::Add { self.value + other.value } else { self.value - other.value };
                ScaledReal::new(v, self.dim)
            }
            ArithOp::Mul => ScaledReal::new(self.value * other.value, self.dim * other.dim),
            ArithOp::Div => {
                if other.value == 0.0 {
                    return Err(CqmError::DivisionByZero);
                }
                ScaledReal::new(self.value / other.value, self.dim / other.dim)
            }
        }
    }

    pub fn pow(self, p: Rational64) -> Result<ScaledReal> {
        let e = *p.numer() as f64 / *p.denom() as f64;
        ScaledReal::new(self.value.powf(e), self.dim.pow(p))
    }
}

impl Add for ScaledReal {
    type Output = Result<ScaledReal>;
    fn add(self, rhs: ScaledReal) -> Result<ScaledReal> {
        self.apply(rhs, ArithOp::Add)
    }
}

impl Sub for ScaledReal {
    type Output = Result<ScaledReal>;
    fn sub(self, rhs: ScaledReal) -> Result<ScaledReal> {
        self.apply(rhs, ArithOp::Sub)
    }
}

impl Mul for ScaledReal {
    type Output = Result<ScaledReal>;
    fn mul(self, rhs: ScaledReal) -> Result<ScaledReal> {
        self.apply(rhs, ArithOp::Mul)
    }
}

impl Div for ScaledReal {
    type Output = Result<ScaledReal>;
    fn div(self, rhs: ScaledReal) -> Result<ScaledReal> {
        self.apply(rhs, ArithOp::Div)
    }
}

impl Neg for ScaledReal {
    type Output = ScaledReal;
    fn neg(self) -> ScaledReal {
        ScaledReal { value: -self.value, dim: self.dim }
    }
}

/// Numeric representatives of the base units. All downstream numerics use
/// plain reals measured in these units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    pub time: f64,
    pub length: f64,
    pub mass: f64,
}

impl Default for Gauge {
    fn default() -> Gauge {
        Gauge { time: 1.0, length: 1.0, mass: 1.0 }
    }
}
