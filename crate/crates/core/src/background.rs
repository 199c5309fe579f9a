//! Galileian background: spatial metric, spacetime connections, electromagnetic field,
//! observers, the cosymplectic form, the orthonormal frame and the ρ tensor.

use rayon::prelude::*;

use crate::error::{CqmError, Result};
use crate::expr::{Constants, FieldDef};
use crate::jet::{EvalPoint, Jet, MAX_ORDER};
use crate::units::Dim;

/// Connection coefficients `K^i_{λμ}`: spatial upper index `i` (chart index `i+1`), symmetric in `λμ`.
pub type Conn = [[[Jet; 4]; 4]; 3];

/// Frame connection coefficients `K̃_λ^a_b`, indexed `[λ][a][b]`.
pub type FrameConn = [[[Jet; 3]; 3]; 4];

/// `ρ_{λμk}`, indexed `[λ][μ][k]`.
pub type Rho = [[[Jet; 3]; 4]; 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coupling {
    Grav,
    Charge,
    Moment,
}

/// Levi-Civita symbol with ε₁₂₃ = +1 on zero-based indices.
pub fn eps(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Coupling constants in gauge units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Physical {
    pub m: f64,
    pub q: f64,
    pub hbar: f64,
    pub mu: f64,
    pub u0: f64,
}

impl Physical {
    /// `m u⁰ / ℏ`, with `u⁰ = 1/u₀`.
    pub fn k(&self) -> f64 {
        self.m / (self.u0 * self.hbar)
    }

    fn from_constants(c: &Constants) -> Result<Physical> {
        let get = |name: &str, dim: Dim| -> Result<f64> {
            let s = c.get(name).ok_or_else(|| CqmError::Scenario(format!("missing constant '{name}'")))?;
            if !s.dim().is_dimensionless() && s.dim() != dim {
                return Err(CqmError::DimensionMismatch { context: format!("constant '{name}'"), left: s.dim(), right: dim });
            }
            Ok(s.value())
        };
        let p = Physical {
            m: get("m", Dim::mass())?,
            q: get("q", Dim::charge())?,
            hbar: get("hbar", Dim::hbar())?,
            mu: get("mu", Dim::mu())?,
            u0: get("u0", Dim::time())?,
        };
        if p.m == 0.0 || p.hbar == 0.0 || p.u0 == 0.0 {
            return Err(CqmError::DivisionByZero);
        }
        Ok(p)
    }
}

/// Constant table holding the five coupling constants with their dimensions.
pub fn standard_constants(m: f64, q: f64, hbar: f64, mu: f64, u0: f64) -> Result<Constants> {
    Constants::new().with("m", m, Dim::mass())?.with("q", q, Dim::charge())?.with("hbar", hbar, Dim::hbar())?.with("mu", mu, Dim::mu())?.with(
        "u0",
        u0,
        Dim::time(),
    )
}

/// Chart-level description of the classical background.
#[derive(Clone, Debug)]
pub struct Background {
    pub constants: Constants,
    pub phys: Physical,
    metric: [[FieldDef; 3]; 3],
    kgrav: [[[FieldDef; 4]; 4]; 3],
    kgrav_set: [[[bool; 4]; 4]; 3],
    levi_civita: bool,
    f: [[FieldDef; 4]; 4],
    potential: [FieldDef; 4],
}

impl Background {
    /// Flat background: `g = δ`, `K♮ = 0`, `F = 0`, `A = 0`.
    pub fn flat(constants: Constants) -> Result<Background> {
        let phys = Physical::from_constants(&constants)?;
        let zero = |n: &str| FieldDef::literal(n, 0.0);
        Ok(Background {
            metric: std::array::from_fn(|i| std::array::from_fn(|j| FieldDef::literal("g", if i == j { 1.0 } else { 0.0 }))),
            kgrav: std::array::from_fn(|_| std::array::from_fn(|_| std::array::from_fn(|_| zero("K")))),
            kgrav_set: [[[false; 4]; 4]; 3],
            levi_civita: false,
            f: std::array::from_fn(|_| std::array::from_fn(|_| zero("F"))),
            potential: std::array::from_fn(|_| zero("A")),
            constants,
            phys,
        })
    }

    fn field(&self, name: String, dim: Dim, src: &str) -> Result<FieldDef> {
        FieldDef::parse(&name, dim, src, &self.constants)
    }

    /// Sets `g_ij = g_ji` (chart indices 1..=3).
    pub fn with_metric(mut self, i: usize, j: usize, src: &str) -> Result<Background> {
        check_index(i, 1..=3)?;
        check_index(j, 1..=3)?;
        let f = self.field(format!("g_{i}{j}"), Dim::ints(2, 0, 0), src)?;
        self.metric[i - 1][j - 1] = f.clone();
        self.metric[j - 1][i - 1] = f;
        Ok(self)
    }

    /// Sets `K♮^i_{λμ} = K♮^i_{μλ}`; `i` in 1..=3, `λ, μ` in 0..=3.
    pub fn with_kgrav(mut self, i: usize, l: usize, m: usize, src: &str) -> Result<Background> {
        check_index(i, 1..=3)?;
        check_index(l, 0..=3)?;
        check_index(m, 0..=3)?;
        if self.levi_civita && l > 0 && m > 0 {
            return Err(CqmError::Scenario("spatial K entries given together with levi_civita".into()));
        }
        let f = self.field(format!("K^{i}_{l}{m}"), Dim::NONE, src)?;
        let slot = &mut self.kgrav_set[i - 1];
        if (slot[l][m] || slot[m][l]) && l != m && self.kgrav[i - 1][l][m].expr != f.expr {
            return Err(CqmError::Scenario(format!("conflicting entries for K^{i}_{l}{m} and K^{i}_{m}{l}")));
        }
        slot[l][m] = true;
        slot[m][l] = true;
        self.kgrav[i - 1][l][m] = f.clone();
        self.kgrav[i - 1][m][l] = f;
        Ok(self)
    }

    /// Fills the spatial coefficients with `−Γ^i_{jk}` of `g`, computed on jets.
    pub fn with_levi_civita(mut self, on: bool) -> Result<Background> {
        if on && (1..4).any(|l| (1..4).any(|m| self.kgrav_set.iter().any(|s| s[l][m]))) {
            return Err(CqmError::Scenario("spatial K entries given together with levi_civita".into()));
        }
        self.levi_civita = on;
        Ok(self)
    }

    /// Sets `F_{λμ} = −F_{μλ}`.
    pub fn with_f(mut self, l: usize, m: usize, src: &str) -> Result<Background> {
        check_index(l, 0..=3)?;
        check_index(m, 0..=3)?;
        if l == m {
            return Err(CqmError::Scenario(format!("diagonal entry F_{l}{m}")));
        }
        let (a, b) = if l < m { (l, m) } else { (m, l) };
        let f = self.field(format!("F_{l}{m}"), Dim::em_form(), src)?;
        let f = if l < m { f } else { FieldDef::new(&f.name, f.dim, crate::expr::Expr::un(crate::expr::UnaryOp::Neg, f.expr.clone()), &self.constants)? };
        self.f[a][b] = f;
        Ok(self)
    }

    /// Sets the reference-observer potential component `A_λ`.
    pub fn with_potential(mut self, l: usize, src: &str) -> Result<Background> {
        check_index(l, 0..=3)?;
        self.potential[l] = self.field(format!("A_{l}"), Dim::NONE, src)?;
        Ok(self)
    }

    pub fn levi_civita(&self) -> bool {
        self.levi_civita
    }

    pub fn metric_field(&self, i: usize, j: usize) -> &FieldDef {
        &self.metric[i][j]
    }

    /// Whether `g` has no explicit time dependence in its expressions.
    pub fn metric_is_static(&self) -> bool {
        self.metric.iter().flatten().all(|f| !f.expr.uses_var(0))
    }

    /// Evaluates all background jets at `point` with field order `order`.
    pub fn jets(&self, point: &EvalPoint, order: usize) -> Result<BgJets> {
        if order > MAX_ORDER {
            return Err(CqmError::OrderOutOfRange(order));
        }
        let n = order;
        let gorder = if self.levi_civita { (n + 1).min(MAX_ORDER) } else { n };
        let mut graw = [[Jet::zero(gorder); 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                graw[i][j] = self.metric[i][j].eval(point, gorder)?;
                graw[j][i] = graw[i][j];
            }
        }
        let g = graw.map(|r| r.map(|x| x.truncate(n)));
        let (l, linv) = cholesky(&graw, point)?;
        let ginv_full = inverse_from(&linv);
        let mut kgrav: Conn = [[[Jet::zero(n); 4]; 4]; 3];
        for i in 0..3 {
            for a in 0..4 {
                for b in a..4 {
                    if !self.kgrav[i][a][b].is_zero() {
                        kgrav[i][a][b] = self.kgrav[i][a][b].eval(point, n)?;
                        kgrav[i][b][a] = kgrav[i][a][b];
                    }
                }
            }
        }
        if self.levi_civita && gorder > 0 {
            let dg: [[[Jet; 3]; 3]; 3] = std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| graw[i][j].d(k + 1))));
            for i in 0..3 {
                for j in 0..3 {
                    for k in j..3 {
                        let mut s = Jet::zero(n);
                        for m in 0..3 {
                            let t = dg[j][m][k] + dg[k][m][j] - dg[m][j][k];
                            s += ginv_full[i][m] * t;
                        }
                        let c = s.scale(-0.5);
                        kgrav[i][j + 1][k + 1] = c;
                        kgrav[i][k + 1][j + 1] = c;
                    }
                }
            }
        }
        let mut f = [[Jet::zero(n); 4]; 4];
        for a in 0..4 {
            for b in a + 1..4 {
                if !self.f[a][b].is_zero() {
                    f[a][b] = self.f[a][b].eval(point, n)?;
                    f[b][a] = -f[a][b];
                }
            }
        }
        let mut a = [Jet::zero(n); 4];
        for (k, slot) in a.iter_mut().enumerate() {
            if !self.potential[k].is_zero() {
                *slot = self.potential[k].eval(point, n)?;
            }
        }
        let ginv = ginv_full.map(|r| r.map(|x| x.truncate(n)));
        let e: [[Jet; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|i| linv[a][i].truncate(n)));
        let cof: [[Jet; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|i| l[i][a].truncate(n)));
        let sqrtg = (l[0][0] * l[1][1] * l[2][2]).truncate(n);

        let mut fup = [[Jet::zero(n); 4]; 3];
        for j in 0..3 {
            for k in 0..4 {
                let mut s = Jet::zero(n);
                for i in 0..3 {
                    s += ginv[j][i] * f[i + 1][k];
                }
                fup[j][k] = s;
            }
        }
        let p = self.phys;
        let join = |c: f64| -> Conn {
            let mut k = kgrav;
            for j in 0..3 {
                for s in 1..4 {
                    let t = fup[j][s].scale(c);
                    k[j][0][s] += t;
                    k[j][s][0] += t;
                }
                k[j][0][0] += fup[j][0].scale(2.0 * c);
            }
            k
        };
        let kcharge = join(p.q / (2.0 * p.m) * p.u0);
        let kmoment = join(-p.mu * p.u0);
        Ok(BgJets { point: *point, order: n, phys: p, g, ginv, sqrtg, kgrav, kcharge, kmoment, f, a, e, cof })
    }

    /// Residuals of the connection axioms, maximised over `samples`.
    pub fn validate(&self, samples: &[EvalPoint]) -> Result<BackgroundResiduals> {
        let per: Vec<Result<BackgroundResiduals>> = samples.par_iter().map(|p| self.validate_at(p)).collect();
        let mut out = BackgroundResiduals::default();
        for r in per {
            out = out.max(&r?);
        }
        Ok(out)
    }

    fn validate_at(&self, p: &EvalPoint) -> Result<BackgroundResiduals> {
        let b = self.jets(p, 2)?;
        let k = &b.kgrav;
        let mut metricity: f64 = 0.0;
        for l in 0..4 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut r = b.g[i][j].d(l).value();
                    for h in 0..3 {
                        r += k[h][l][i + 1].value() * b.g[h][j].value() + k[h][l][j + 1].value() * b.g[i][h].value();
                    }
                    metricity = metricity.max(r.abs());
                }
            }
        }
        let mut torsion: f64 = 0.0;
        for row in k.iter() {
            for l in 0..4 {
                for m in 0..4 {
                    torsion = torsion.max((row[l][m].value() - row[m][l].value()).abs());
                }
            }
        }
        let riem = b.spatial_riemann()?;
        let mut curvature_symmetry: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for h in 0..3 {
                    for q in 0..3 {
                        curvature_symmetry = curvature_symmetry.max((riem[i][j][h][q] - riem[h][q][i][j]).abs());
                    }
                }
            }
        }
        let mut closed_f: f64 = 0.0;
        for a in 0..4 {
            for c in a + 1..4 {
                for d in c + 1..4 {
                    let r = b.f[c][d].d(a).value() + b.f[d][a].d(c).value() + b.f[a][c].d(d).value();
                    closed_f = closed_f.max(r.abs());
                }
            }
        }
        Ok(BackgroundResiduals { metricity, torsion, curvature_symmetry, closed_f })
    }
}

fn check_index(i: usize, r: std::ops::RangeInclusive<usize>) -> Result<()> {
    if r.contains(&i) {
        Ok(())
    } else {
        Err(CqmError::Scenario(format!("index {i} outside {r:?}")))
    }
}

type M3 = [[Jet; 3]; 3];

/// Lower Cholesky factor of `g` and its inverse.
fn cholesky(g: &M3, p: &EvalPoint) -> Result<(M3, M3)> {
    let n = g[0][0].order();
    let z = Jet::zero(n);
    let mut l = [[z; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = g[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s.value() <= 0.0 || s.value().is_nan() {
                    return Err(CqmError::NotPositiveDefinite(p.x));
                }
                l[i][i] = s.sqrt()?;
            } else {
                l[i][j] = s.try_div(&l[j][j])?;
            }
        }
    }
    let mut li = [[z; 3]; 3];
    for i in 0..3 {
        li[i][i] = l[i][i].recip()?;
        for j in 0..i {
            let mut s = z;
            for k in j..i {
                s += l[i][k] * li[k][j];
            }
            li[i][j] = -(s * li[i][i]);
        }
    }
    Ok((l, li))
}

/// `g^{ij} = Σ_a Linv_{ai} Linv_{aj}`.
fn inverse_from(li: &M3) -> M3 {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut s = Jet::zero(li[0][0].order());
            for row in li.iter() {
                s += row[i] * row[j];
            }
            s
        })
    })
}

/// Maximal residuals of [`Background::validate`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BackgroundResiduals {
    pub metricity: f64,
    pub torsion: f64,
    pub curvature_symmetry: f64,
    pub closed_f: f64,
}

impl BackgroundResiduals {
    fn max(&self, o: &BackgroundResiduals) -> BackgroundResiduals {
        BackgroundResiduals {
            metricity: self.metricity.max(o.metricity),
            torsion: self.torsion.max(o.torsion),
            curvature_symmetry: self.curvature_symmetry.max(o.curvature_symmetry),
            closed_f: self.closed_f.max(o.closed_f),
        }
    }
}

/// Background jets at one point.
#[derive(Clone, Debug)]
pub struct BgJets {
    pub point: EvalPoint,
    pub order: usize,
    pub phys: Physical,
    pub g: M3,
    pub ginv: M3,
    pub sqrtg: Jet,
    pub kgrav: Conn,
    pub kcharge: Conn,
    pub kmoment: Conn,
    /// `F_{λμ}`.
    pub f: [[Jet; 4]; 4],
    /// Reference-observer potential `A_λ`.
    pub a: [Jet; 4],
    /// Frame vectors, `e[a][i] = e_a^i`.
    pub e: M3,
    /// Coframe, `cof[a][i] = e^a_i`.
    pub cof: M3,
}

impl BgJets {
    pub fn connection(&self, c: Coupling) -> &Conn {
        match c {
            Coupling::Grav => &self.kgrav,
            Coupling::Charge => &self.kcharge,
            Coupling::Moment => &self.kmoment,
        }
    }

    fn need(&self, k: usize) -> Result<()> {
        if self.order < k {
            Err(CqmError::OrderOutOfRange(self.order))
        } else {
            Ok(())
        }
    }

    /// `K̃_λ^a_b = e^a_i (Ǩ^i_{λj} e_b^j − ∂_λ e_b^i)`, one order below the fields.
    pub fn ktilde(&self, c: Coupling) -> Result<FrameConn> {
        self.need(1)?;
        let k = self.connection(c);
        let n = self.order - 1;
        let mut out = [[[Jet::zero(n); 3]; 3]; 4];
        for (l, ol) in out.iter_mut().enumerate() {
            for b in 0..3 {
                let mut w = [Jet::zero(n); 3];
                for (i, wi) in w.iter_mut().enumerate() {
                    let mut s = -self.e[b][i].d(l);
                    for j in 0..3 {
                        s += k[i][l][j + 1] * self.e[b][j];
                    }
                    *wi = s;
                }
                for a in 0..3 {
                    let mut s = Jet::zero(n);
                    for i in 0..3 {
                        s += self.cof[a][i] * w[i];
                    }
                    ol[a][b] = s;
                }
            }
        }
        Ok(out)
    }

    /// Curvature of the frame connection, `Ř_{λμ} = −∂_λK̃_μ + ∂_μK̃_λ + [K̃_λ, K̃_μ]`, indexed `[λ][μ][a][b]`.
    pub fn rcheck(&self, c: Coupling) -> Result<[[M3; 4]; 4]> {
        self.need(2)?;
        let kt = self.ktilde(c)?;
        let n = self.order - 2;
        let mut out = [[[[Jet::zero(n); 3]; 3]; 4]; 4];
        for l in 0..4 {
            for m in l + 1..4 {
                for a in 0..3 {
                    for b in 0..3 {
                        let mut s = kt[l][a][b].d(m) - kt[m][a][b].d(l);
                        for h in 0..3 {
                            s += kt[l][a][h] * kt[m][h][b] - kt[m][a][h] * kt[l][h][b];
                        }
                        out[l][m][a][b] = s;
                        out[m][l][a][b] = -s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `ρ_{λμk} = −½ Ř_{λμ}^{ab} ε_{abk}`.
    pub fn rho(&self, c: Coupling) -> Result<Rho> {
        let r = self.rcheck(c)?;
        let n = self.order - 2;
        let mut out = [[[Jet::zero(n); 3]; 4]; 4];
        for l in 0..4 {
            for m in 0..4 {
                for k in 0..3 {
                    let mut s = Jet::zero(n);
                    for a in 0..3 {
                        for b in 0..3 {
                            let e = eps(a, b, k);
                            if e != 0.0 {
                                s += r[l][m][a][b].scale(e);
                            }
                        }
                    }
                    out[l][m][k] = s.scale(-0.5);
                }
            }
        }
        Ok(out)
    }

    /// Frame components `B^a = ½ ε^{abc} e_b^i e_c^j F_ij`.
    pub fn magnetic(&self) -> [Jet; 3] {
        let n = self.order;
        let mut fc = [[Jet::zero(n); 3]; 3];
        for b in 0..3 {
            for c in 0..3 {
                let mut s = Jet::zero(n);
                for i in 0..3 {
                    for j in 0..3 {
                        s += self.e[b][i] * self.e[c][j] * self.f[i + 1][j + 1];
                    }
                }
                fc[b][c] = s;
            }
        }
        std::array::from_fn(|a| {
            let mut s = Jet::zero(n);
            for b in 0..3 {
                for c in 0..3 {
                    let e = eps(a, b, c);
                    if e != 0.0 {
                        s += fc[b][c].scale(0.5 * e);
                    }
                }
            }
            s
        })
    }

    /// Component table of Ω in the basis `dx⁰..dx³, dx₀¹..dx₀³` at velocity `v`.
    pub fn omega(&self, v: &[Jet; 3]) -> [[Jet; 7]; 7] {
        let n = self.order.min(v[0].order());
        let k = &self.kcharge;
        let mut theta = [[Jet::zero(n); 7]; 3];
        let mut beta = [[Jet::zero(n); 7]; 3];
        for i in 0..3 {
            theta[i][4 + i] = Jet::constant(1.0, n);
            for l in 0..4 {
                let mut s = k[i][l][0];
                for h in 0..3 {
                    s += k[i][l][h + 1] * v[h];
                }
                theta[i][l] = -s;
            }
            beta[i][i + 1] = Jet::constant(1.0, n);
            beta[i][0] = -v[i];
        }
        let kk = self.phys.k();
        let mut t = [[Jet::zero(n); 7]; 7];
        for a in 0..7 {
            for b in a + 1..7 {
                let mut s = Jet::zero(n);
                for i in 0..3 {
                    for j in 0..3 {
                        s += self.g[i][j] * (theta[i][a] * beta[j][b] - theta[i][b] * beta[j][a]);
                    }
                }
                t[a][b] = s.scale(kk);
                t[b][a] = -t[a][b];
            }
        }
        t
    }

    /// `γ^i = K^i_{00} + 2K^i_{0j}v^j + K^i_{hj}v^h v^j` for the charge-joined connection.
    pub fn gamma(&self, v: [f64; 3]) -> [f64; 3] {
        let k = &self.kcharge;
        std::array::from_fn(|i| {
            let mut s = k[i][0][0].value();
            for j in 0..3 {
                s += 2.0 * k[i][0][j + 1].value() * v[j];
                for h in 0..3 {
                    s += k[i][h + 1][j + 1].value() * v[h] * v[j];
                }
            }
            s
        })
    }

    /// Φ[o] as the pullback of Ω along the observer. `None` is the reference observer.
    pub fn phi(&self, observer: Option<&[Jet; 3]>) -> Result<[[Jet; 4]; 4]> {
        let (v, n) = match observer {
            None => ([Jet::zero(self.order); 3], self.order),
            Some(o) => {
                let n = o[0].order().min(self.order);
                if n == 0 {
                    return Err(CqmError::OrderOutOfRange(0));
                }
                (*o, n - 1)
            }
        };
        let t = self.omega(&v);
        let mut pull = [[Jet::zero(n); 4]; 7];
        for (l, row) in pull.iter_mut().enumerate().take(4) {
            row[l] = Jet::constant(1.0, n);
        }
        if let Some(o) = observer {
            for i in 0..3 {
                for l in 0..4 {
                    pull[4 + i][l] = o[i].d(l);
                }
            }
        }
        let mut out = [[Jet::zero(n); 4]; 4];
        for l in 0..4 {
            for m in l + 1..4 {
                let mut s = Jet::zero(n);
                for a in 0..7 {
                    for b in 0..7 {
                        if a != b {
                            s += t[a][b] * pull[a][l] * pull[b][m];
                        }
                    }
                }
                out[l][m] = s;
                out[m][l] = -s;
            }
        }
        Ok(out)
    }

    /// Spatial Riemann tensor `R_{ijhk}` of the gravitational connection (values).
    pub fn spatial_riemann(&self) -> Result<[[[[f64; 3]; 3]; 3]; 3]> {
        self.need(1)?;
        let k = &self.kgrav;
        let gam = |i: usize, j: usize, m: usize| -k[i][j + 1][m + 1];
        let mut up = [[[[0.0; 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for h in 0..3 {
                    for q in 0..3 {
                        let mut s = gam(i, q, j).d(h + 1).value() - gam(i, h, j).d(q + 1).value();
                        for m in 0..3 {
                            s += gam(i, h, m).value() * gam(m, q, j).value() - gam(i, q, m).value() * gam(m, h, j).value();
                        }
                        up[i][j][h][q] = s;
                    }
                }
            }
        }
        let mut out = [[[[0.0; 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for h in 0..3 {
                    for q in 0..3 {
                        out[i][j][h][q] = (0..3).map(|l| self.g[i][l].value() * up[l][j][h][q]).sum();
                    }
                }
            }
        }
        Ok(out)
    }

    /// Frame packet for the given coupling.
    pub fn frame(&self, c: Coupling) -> Result<FramePacket> {
        Ok(FramePacket { e: self.e, cof: self.cof, ktilde: self.ktilde(c)? })
    }
}

/// Orthonormal triad with the frame connection coefficients.
#[derive(Clone, Debug)]
pub struct FramePacket {
    pub e: M3,
    pub cof: M3,
    pub ktilde: FrameConn,
}

/// Builds the frame packet at `point`; `order` is the order of the returned `K̃` jets.
pub fn orthonormal_frame(bg: &Background, point: &EvalPoint, order: usize, c: Coupling) -> Result<FramePacket> {
    if order > 2 {
        return Err(CqmError::OrderOutOfRange(order));
    }
    bg.jets(point, order + 1)?.frame(c)
}

/// An observer given by its chart components `o^i₀`.
#[derive(Clone, Debug)]
pub struct Observer {
    pub name: String,
    pub o: [FieldDef; 3],
}

impl Observer {
    pub fn reference() -> Observer {
        Observer { name: "reference".into(), o: std::array::from_fn(|_| FieldDef::literal("o", 0.0)) }
    }

    pub fn parse(name: &str, src: [&str; 3], c: &Constants) -> Result<Observer> {
        let o = [0, 1, 2].map(|i| FieldDef::parse(&format!("{name}^{}", i + 1), Dim::NONE, src[i], c));
        let [a, b, d] = o;
        Ok(Observer { name: name.into(), o: [a?, b?, d?] })
    }

    pub fn is_reference(&self) -> bool {
        self.o.iter().all(|f| f.is_zero())
    }

    pub fn eval(&self, p: &EvalPoint, order: usize) -> Result<[Jet; 3]> {
        let [a, b, c] = [0, 1, 2].map(|i| self.o[i].eval(p, order));
        Ok([a?, b?, c?])
    }
}

/// A point of the spin phase space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: EvalPoint,
    pub v: [f64; 3],
    pub s: [f64; 3],
}

impl PhasePoint {
    pub fn new(x: [f64; 4], v: [f64; 3], s: [f64; 3]) -> Result<PhasePoint> {
        if v.iter().chain(s.iter()).any(|a| !a.is_finite()) {
            return Err(CqmError::NonFinite(format!("{v:?} {s:?}")));
        }
        Ok(PhasePoint { x: EvalPoint::new(x)?, v, s })
    }
}

/// Point values of `(Ř, ρ)`, with the index layout of [`BgJets::rcheck`] and [`BgJets::rho`].
pub type CurvatureValues = ([[[[f64; 3]; 3]; 4]; 4], [[[f64; 3]; 4]; 4]);

/// Numeric `(Ř, ρ)` at a point for the given coupling.
pub fn vertical_curvature_rho(bg: &Background, c: Coupling, p: &EvalPoint) -> Result<CurvatureValues> {
    let b = bg.jets(p, 2)?;
    let r = b.rcheck(c)?.map(|x| x.map(|y| y.map(|z| z.map(|w| w.value()))));
    let rho = b.rho(c)?.map(|x| x.map(|y| y.map(|w| w.value())));
    Ok((r, rho))
}

/// Numeric `(Ω table, γ)` at a phase point.
pub fn cosymplectic_and_gamma(bg: &Background, p: &PhasePoint) -> Result<([[f64; 7]; 7], [f64; 3])> {
    let b = bg.jets(&p.x, 0)?;
    let v = p.v.map(|x| Jet::constant(x, 0));
    Ok((b.omega(&v).map(|r| r.map(|x| x.value())), b.gamma(p.v)))
}

/// Numeric Φ[o] at a point.
pub fn observer_phi(bg: &Background, o: &Observer, p: &EvalPoint) -> Result<[[f64; 4]; 4]> {
    let phi = if o.is_reference() {
        bg.jets(p, 0)?.phi(None)?
    } else {
        let b = bg.jets(p, 1)?;
        b.phi(Some(&o.eval(p, 1)?))?
    };
    Ok(phi.map(|r| r.map(|x| x.value())))
}

/// Numeric frame components of B.
pub fn magnetic_field(bg: &Background, p: &EvalPoint) -> Result<[f64; 3]> {
    Ok(bg.jets(p, 0)?.magnetic().map(|x| x.value()))
}

/// Evaluator for a joined connection at any point.
pub fn joined_connection(bg: &Background, c: Coupling) -> impl Fn(&EvalPoint, usize) -> Result<Conn> + '_ {
    move |p, order| Ok(*bg.jets(p, order)?.connection(c))
}
