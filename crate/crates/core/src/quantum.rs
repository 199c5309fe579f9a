//! Spinor grids, pre-quantum operators and Crank–Nicolson evolution of the Pauli equation.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::background::{Background, Coupling, PhasePoint, Physical};
use crate::error::{CqmError, Result};
use crate::hermitian::{ch_along, cm_value, from_special_jets, HCtx};
use crate::jet::{EvalPoint, Jet};
use crate::pauli::{sigma, spin_connection_from, spin_matrix, SpinMatrix};
use crate::special::{bracket_jets, SfJets, SpecialFunction};

pub type Spinor = [Complex64; 2];

const I: Complex64 = Complex64::new(0.0, 1.0);
const PAR_MIN: usize = 4096;

/// One spatial axis: `n` nodes spanning `[min, max]`; `n = 1` marks an inactive axis at `min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Axis> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(CqmError::NonFinite(format!("axis [{min}, {max}]")));
        }
        if n == 2 || n == 0 || (n >= 3 && max <= min) {
            return Err(CqmError::Domain(format!("axis needs n = 1 or n >= 3 with max > min, got n = {n} on [{min}, {max}]")));
        }
        Ok(Axis { min, max, n })
    }

    pub fn inactive(at: f64) -> Axis {
        Axis { min: at, max: at, n: 1 }
    }

    pub fn active(&self) -> bool {
        self.n > 1
    }

    pub fn h(&self) -> f64 {
        if self.active() {
            (self.max - self.min) / (self.n - 1) as f64
        } else {
            1.0
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.min + i as f64 * if self.active() { self.h() } else { 0.0 }
    }
}

/// Node layout of a spatial grid at fixed time, row-major with `x³` fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Layout {
    pub axes: [Axis; 3],
    pub time: f64,
}

impl Layout {
    pub fn new(axes: [Axis; 3], time: f64) -> Result<Layout> {
        for a in &axes {
            Axis::new(a.min, a.max, a.n)?;
        }
        if !time.is_finite() {
            return Err(CqmError::NonFinite("grid time".into()));
        }
        Ok(Layout { axes, time })
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn strides(&self) -> [usize; 3] {
        [self.axes[1].n * self.axes[2].n, self.axes[2].n, 1]
    }

    pub fn multi(&self, idx: usize) -> [usize; 3] {
        let s = self.strides();
        [idx / s[0], (idx / s[1]) % self.axes[1].n, idx % self.axes[2].n]
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let m = self.multi(idx);
        std::array::from_fn(|i| self.axes[i].coord(m[i]))
    }

    pub fn point(&self, idx: usize) -> EvalPoint {
        let c = self.coords(idx);
        EvalPoint { x: [self.time, c[0], c[1], c[2]] }
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.h()).product()
    }

    /// Neighbour offset by `d` along axis `i`, or `None` past the boundary.
    fn shift(&self, idx: usize, i: usize, d: isize) -> Option<usize> {
        let m = self.multi(idx)[i] as isize + d;
        if m < 0 || m >= self.axes[i].n as isize {
            return None;
        }
        Some((idx as isize + d * self.strides()[i] as isize) as usize)
    }

    fn same_shape(&self, o: &Layout) -> bool {
        self == o
    }
}

/// Two-component wave function sampled at the nodes of a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorGrid {
    pub layout: Layout,
    pub psi: Vec<Spinor>,
}

impl SpinorGrid {
    pub fn zeros(layout: Layout) -> SpinorGrid {
        SpinorGrid { layout, psi: vec![[Complex64::new(0.0, 0.0); 2]; layout.len()] }
    }

    /// Samples `f(x⁰, x¹, x², x³)`; boundary nodes of active axes are set to zero.
    pub fn from_fn(layout: Layout, f: impl Fn([f64; 4]) -> Spinor) -> SpinorGrid {
        let psi = (0..layout.len())
            .map(|n| {
                let m = layout.multi(n);
                let edge = (0..3).any(|i| layout.axes[i].active() && (m[i] == 0 || m[i] + 1 == layout.axes[i].n));
                if edge {
                    [Complex64::new(0.0, 0.0); 2]
                } else {
                    f(layout.point(n).x)
                }
            })
            .collect();
        SpinorGrid { layout, psi }
    }

    pub fn scale(&self, a: Complex64) -> SpinorGrid {
        SpinorGrid { layout: self.layout, psi: self.psi.iter().map(|s| [s[0] * a, s[1] * a]).collect() }
    }

    pub fn add(&self, o: &SpinorGrid) -> Result<SpinorGrid> {
        check_layout(&self.layout, &o.layout)?;
        Ok(SpinorGrid { layout: self.layout, psi: self.psi.iter().zip(&o.psi).map(|(a, b)| [a[0] + b[0], a[1] + b[1]]).collect() })
    }

    pub fn sub(&self, o: &SpinorGrid) -> Result<SpinorGrid> {
        self.add(&o.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn max_abs_diff(&self, o: &SpinorGrid) -> Result<f64> {
        check_layout(&self.layout, &o.layout)?;
        Ok(self.psi.iter().zip(&o.psi).map(|(a, b)| (a[0] - b[0]).norm().max((a[1] - b[1]).norm())).fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.psi.iter().map(|a| a[0].norm().max(a[1].norm())).fold(0.0, f64::max)
    }
}

fn check_layout(a: &Layout, b: &Layout) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(CqmError::GridMismatch(format!("{a:?} vs {b:?}")))
    }
}

/// Pointwise geometric data used by the grid operators.
#[derive(Clone, Debug)]
pub struct NodeGeom {
    pub sqrtg: f64,
    pub ginv: [[f64; 3]; 3],
    /// `∂_λ√|g| / (2√|g|)`.
    pub half_dlog: [f64; 4],
    pub a: [f64; 4],
    /// `da[λ][μ] = ∂_λ A_μ`.
    pub da: [[f64; 4]; 4],
    /// Spatial charge-joined coefficients `K^h_{ij}` as `k[h][i][j]`.
    pub k: [[[f64; 3]; 3]; 3],
    /// `C_λ^k ξ_k`.
    pub c: [SpinMatrix; 4],
    pub c_comp: [[f64; 3]; 4],
    pub b: [f64; 3],
}

/// Grid geometry sampled from a background.
#[derive(Clone, Debug)]
pub struct GridGeom {
    pub layout: Layout,
    pub phys: Physical,
    pub nodes: Vec<NodeGeom>,
}

/// Background together with its reference-observer potential and moment-joined spin connection.
#[derive(Clone, Debug)]
pub struct QuantumData {
    pub bg: Background,
}

/// `Ch₀`, `Ch_i` at a phase point, with `H₀ = −Ch₀` and `P_i = Ch_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChComponents {
    pub ch0: f64,
    pub chi: [f64; 3],
    pub h0: f64,
    pub p: [f64; 3],
}

impl QuantumData {
    pub fn new(bg: Background) -> QuantumData {
        QuantumData { bg }
    }

    pub fn ch_components(&self, p: &PhasePoint) -> Result<ChComponents> {
        let b = self.bg.jets(&p.x, 0)?;
        let v = p.v.map(|x| Jet::constant(x, 0));
        let ch = ch_along(&b, &v).map(|j| j.value());
        let chi = [ch[1], ch[2], ch[3]];
        Ok(ChComponents { ch0: ch[0], chi, h0: -ch[0], p: chi })
    }

    /// Largest `|∂_λA_μ − ∂_μA_λ − Φ_{λμ}|` over the points.
    pub fn potential_residual(&self, points: &[EvalPoint]) -> Result<f64> {
        let per: Vec<Result<f64>> = points
            .par_iter()
            .map(|p| {
                let b = self.bg.jets(p, 1)?;
                let phi = b.phi(None)?;
                let mut worst: f64 = 0.0;
                for l in 0..4 {
                    for m in 0..4 {
                        let da = b.a[m].d(l).value() - b.a[l].d(m).value();
                        worst = worst.max((da - phi[l][m].value()).abs());
                    }
                }
                Ok(worst)
            })
            .collect();
        per.into_iter().try_fold(0.0f64, |w, r| Ok(w.max(r?)))
    }

    pub fn node(&self, p: &EvalPoint) -> Result<NodeGeom> {
        let b = self.bg.jets(p, 1)?;
        let sc = spin_connection_from(&b, Coupling::Moment)?;
        let kc = b.connection(Coupling::Charge);
        let sg = b.sqrtg.value();
        Ok(NodeGeom {
            sqrtg: sg,
            ginv: b.ginv.map(|r| r.map(|j| j.value())),
            half_dlog: std::array::from_fn(|l| b.sqrtg.d(l).value() / (2.0 * sg)),
            a: b.a.map(|j| j.value()),
            da: std::array::from_fn(|l| std::array::from_fn(|m| b.a[m].d(l).value())),
            k: std::array::from_fn(|h| std::array::from_fn(|i| std::array::from_fn(|j| kc[h][i + 1][j + 1].value()))),
            c: std::array::from_fn(|l| spin_matrix(&sc[l])),
            c_comp: sc.map(|r| r.map(|j| j.value())),
            b: b.magnetic().map(|j| j.value()),
        })
    }

    pub fn geometry(&self, layout: &Layout) -> Result<GridGeom> {
        let nodes: Result<Vec<NodeGeom>> = (0..layout.len()).into_par_iter().map(|n| self.node(&layout.point(n))).collect();
        Ok(GridGeom { layout: *layout, phys: self.bg.phys, nodes: nodes? })
    }
}

impl GridGeom {
    /// `⟨a, b⟩ = Σ (ā¹b¹ + ā²b²) √|g| ΔV`.
    pub fn inner(&self, a: &SpinorGrid, b: &SpinorGrid) -> Result<Complex64> {
        check_layout(&self.layout, &a.layout)?;
        check_layout(&self.layout, &b.layout)?;
        let s: Complex64 = a.psi.iter().zip(&b.psi).zip(&self.nodes).map(|((x, y), g)| (x[0].conj() * y[0] + x[1].conj() * y[1]) * g.sqrtg).sum();
        Ok(s * self.layout.cell_volume())
    }

    pub fn norm_sq(&self, a: &SpinorGrid) -> Result<f64> {
        Ok(self.inner(a, a)?.re)
    }

    pub fn normalized(&self, a: &SpinorGrid) -> Result<SpinorGrid> {
        let n = self.norm_sq(a)?;
        if n <= 0.0 {
            return Err(CqmError::Domain("cannot normalise a zero wave function".into()));
        }
        Ok(a.scale(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    /// `⟨ψ, ½σ_k ψ⟩ / ⟨ψ, ψ⟩`.
    pub fn spin_expectation(&self, a: &SpinorGrid) -> Result<[f64; 3]> {
        let n = self.norm_sq(a)?;
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let s = sigma(k + 1);
            let sb = SpinorGrid { layout: a.layout, psi: a.psi.iter().map(|p| mat_vec(&(s * Complex64::new(0.5, 0.0)), p)).collect() };
            *o = self.inner(a, &sb)?.re / n;
        }
        Ok(out)
    }

    /// Position standard deviation per axis under the density `|ψ|²√|g|`.
    pub fn widths(&self, a: &SpinorGrid) -> Result<[f64; 3]> {
        check_layout(&self.layout, &a.layout)?;
        let (mut w, mut m1, mut m2) = (0.0, [0.0; 3], [0.0; 3]);
        for (n, (p, g)) in a.psi.iter().zip(&self.nodes).enumerate() {
            let rho = (p[0].norm_sqr() + p[1].norm_sqr()) * g.sqrtg;
            let x = self.layout.coords(n);
            w += rho;
            for i in 0..3 {
                m1[i] += rho * x[i];
                m2[i] += rho * x[i] * x[i];
            }
        }
        Ok(std::array::from_fn(|i| {
            let mean = m1[i] / w;
            (m2[i] / w - mean * mean).max(0.0).sqrt()
        }))
    }
}

pub fn inner_product(geom: &GridGeom, a: &SpinorGrid, b: &SpinorGrid) -> Result<Complex64> {
    geom.inner(a, b)
}

fn mat_vec(m: &SpinMatrix, v: &Spinor) -> Spinor {
    [m[(0, 0)] * v[0] + m[(0, 1)] * v[1], m[(1, 0)] * v[0] + m[(1, 1)] * v[1]]
}

/// Differential operator at a node: `d2[i][j] ∂_i∂_j + d1[i] ∂_i + m0`, scalar derivative coefficients.
#[derive(Clone, Copy, Debug)]
pub struct Local {
    pub d2: [[Complex64; 3]; 3],
    pub d1: [Complex64; 3],
    pub m0: SpinMatrix,
}

impl Local {
    pub fn zero() -> Local {
        let z = Complex64::new(0.0, 0.0);
        Local { d2: [[z; 3]; 3], d1: [z; 3], m0: SpinMatrix::zeros() }
    }

    pub fn mul(m0: SpinMatrix) -> Local {
        Local { m0, ..Local::zero() }
    }

    pub fn scaled(&self, a: Complex64) -> Local {
        Local { d2: self.d2.map(|r| r.map(|x| x * a)), d1: self.d1.map(|x| x * a), m0: self.m0 * a }
    }

    pub fn plus(&self, o: &Local) -> Local {
        Local {
            d2: std::array::from_fn(|i| std::array::from_fn(|j| self.d2[i][j] + o.d2[i][j])),
            d1: std::array::from_fn(|i| self.d1[i] + o.d1[i]),
            m0: self.m0 + o.m0,
        }
    }

    fn row(&self, layout: &Layout, idx: usize) -> Vec<(usize, SpinMatrix)> {
        let one = SpinMatrix::identity();
        let mut out: Vec<(usize, SpinMatrix)> = vec![(idx, self.m0)];
        let mut push = |col: Option<usize>, c: Complex64| {
            if let Some(col) = col {
                if c != Complex64::new(0.0, 0.0) {
                    match out.iter_mut().find(|(k, _)| *k == col) {
                        Some((_, m)) => *m += one * c,
                        None => out.push((col, one * c)),
                    }
                }
            }
        };
        for i in 0..3 {
            let ax = layout.axes[i];
            if !ax.active() {
                continue;
            }
            let h = ax.h();
            let c1 = self.d1[i] / (2.0 * h);
            push(layout.shift(idx, i, 1), c1);
            push(layout.shift(idx, i, -1), -c1);
            let c2 = self.d2[i][i] / (h * h);
            push(layout.shift(idx, i, 1), c2);
            push(layout.shift(idx, i, -1), c2);
            push(Some(idx), -2.0 * c2);
            for j in i + 1..3 {
                let bx = layout.axes[j];
                if !bx.active() {
                    continue;
                }
                let c = (self.d2[i][j] + self.d2[j][i]) / (4.0 * h * bx.h());
                for (si, sj, sgn) in [(1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)] {
                    push(layout.shift(idx, i, si).and_then(|n| layout.shift(n, j, sj)), c * sgn);
                }
            }
        }
        out
    }
}

/// Linear map on spinor grids stored as a sparse matrix of 2×2 blocks.
#[derive(Clone, Debug)]
pub struct GridOperator {
    pub label: String,
    pub symmetric: bool,
    pub layout: Layout,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<SpinMatrix>,
}

impl GridOperator {
    pub fn from_locals(label: &str, symmetric: bool, layout: &Layout, locals: &[Local]) -> GridOperator {
        let rows: Vec<Vec<(usize, SpinMatrix)>> = locals.par_iter().enumerate().map(|(n, l)| l.row(layout, n)).collect();
        Self::from_rows(label, symmetric, layout, rows)
    }

    fn from_rows(label: &str, symmetric: bool, layout: &Layout, rows: Vec<Vec<(usize, SpinMatrix)>>) -> GridOperator {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        row_ptr.push(0);
        for r in rows {
            for (c, m) in r {
                cols.push(c);
                vals.push(m);
            }
            row_ptr.push(cols.len());
        }
        GridOperator { label: label.to_string(), symmetric, layout: *layout, row_ptr, cols, vals }
    }

    fn apply_raw(&self, psi: &[Spinor]) -> Vec<Spinor> {
        let row = |n: usize| {
            let mut acc = [Complex64::new(0.0, 0.0); 2];
            for k in self.row_ptr[n]..self.row_ptr[n + 1] {
                let v = mat_vec(&self.vals[k], &psi[self.cols[k]]);
                acc[0] += v[0];
                acc[1] += v[1];
            }
            acc
        };
        if psi.len() >= PAR_MIN {
            (0..psi.len()).into_par_iter().map(row).collect()
        } else {
            (0..psi.len()).map(row).collect()
        }
    }

    pub fn apply(&self, g: &SpinorGrid) -> Result<SpinorGrid> {
        check_layout(&self.layout, &g.layout)?;
        Ok(SpinorGrid { layout: g.layout, psi: self.apply_raw(&g.psi) })
    }

    /// `a·1 + b·self`.
    pub fn affine(&self, a: Complex64, b: Complex64) -> GridOperator {
        let mut out = self.clone();
        for v in out.vals.iter_mut() {
            *v *= b;
        }
        for n in 0..self.layout.len() {
            let k = (out.row_ptr[n]..out.row_ptr[n + 1]).find(|&k| out.cols[k] == n).expect("diagonal entry");
            out.vals[k] += SpinMatrix::identity() * a;
        }
        out
    }

    /// Conjugate transpose in the plain ℓ² sense.
    pub fn adjoint(&self) -> GridOperator {
        let n = self.layout.len();
        let mut rows: Vec<Vec<(usize, SpinMatrix)>> = vec![Vec::new(); n];
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                rows[self.cols[k]].push((r, self.vals[k].adjoint()));
            }
        }
        Self::from_rows(&format!("{}^H", self.label), self.symmetric, &self.layout, rows)
    }
}

/// `[O₁, O₂]ψ = −i(O₁O₂ψ − O₂O₁ψ)`.
pub fn operator_bracket(a: &GridOperator, b: &GridOperator, probe: &SpinorGrid) -> Result<SpinorGrid> {
    check_layout(&a.layout, &b.layout)?;
    let ab = a.apply(&b.apply(probe)?)?;
    let ba = b.apply(&a.apply(probe)?)?;
    Ok(ab.sub(&ba)?.scale(-I))
}

fn kappa(p: &Physical) -> f64 {
    p.u0 * p.hbar / p.m
}

/// `Δ₀ = u₀(ℏ/m) g^{ij}((∂_i − iA_i)(∂_j − iA_j) + K^h_{ij}(∂_h − iA_h))` at a node.
pub fn laplacian_local(g: &NodeGeom, phys: &Physical) -> Local {
    let kap = kappa(phys);
    let mut l = Local::zero();
    let mut m0 = Complex64::new(0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            let gij = g.ginv[i][j];
            l.d2[i][j] += gij * kap;
            l.d1[i] += -I * (2.0 * kap * gij * g.a[j + 1]);
            m0 += kap * gij * (-I * g.da[i + 1][j + 1] - g.a[i + 1] * g.a[j + 1]);
            for h in 0..3 {
                l.d1[h] += kap * gij * g.k[h][i][j];
                m0 += -I * (kap * gij * g.k[h][i][j] * g.a[h + 1]);
            }
        }
    }
    l.m0 = SpinMatrix::identity() * m0;
    l
}

pub fn observed_laplacian(geom: &GridGeom) -> GridOperator {
    let locals: Vec<Local> = geom.nodes.iter().map(|g| laplacian_local(g, &geom.phys)).collect();
    GridOperator::from_locals("laplacian", true, &geom.layout, &locals)
}

fn max_d0_sqrtg(geom: &GridGeom) -> f64 {
    geom.nodes.iter().map(|g| (2.0 * g.half_dlog[0] * g.sqrtg).abs()).fold(0.0, f64::max)
}

/// Generator `H = −½Δ₀ − A₀ + i C₀^k ξ_k` with `i∂₀ψ = Hψ` on the Pauli kernel.
pub fn pauli_generator(qd: &QuantumData, geom: &GridGeom) -> Result<GridOperator> {
    let d0 = max_d0_sqrtg(geom);
    if !qd.bg.metric_is_static() || d0 > 1e-12 {
        return Err(CqmError::NonStaticMetric(d0));
    }
    let locals: Vec<Local> = geom
        .nodes
        .iter()
        .map(|g| {
            let lap = laplacian_local(g, &geom.phys).scaled(Complex64::new(-0.5, 0.0));
            lap.plus(&Local::mul(SpinMatrix::identity() * Complex64::new(-g.a[0], 0.0) + g.c[0] * I))
        })
        .collect();
    Ok(GridOperator::from_locals("pauli", true, &geom.layout, &locals))
}

/// `ψ ↦ i(Y.ψ − u₀ f⁰ 𝔓ψ)` with the `∂₀ψ` contributions cancelled before discretisation.
pub fn prequantum(qd: &QuantumData, geom: &GridGeom, f: &SpecialFunction) -> Result<GridOperator> {
    prequantum_with(qd, geom, &format!("prequantum({})", f.name), 1, |ctx| f.jets(&ctx.b, 1))
}

/// Pre-quantum operator of `⟦F, G⟧`, with the bracket formed node by node.
pub fn prequantum_of_bracket(qd: &QuantumData, geom: &GridGeom, f: &SpecialFunction, g: &SpecialFunction) -> Result<GridOperator> {
    prequantum_with(qd, geom, &format!("prequantum([{}, {}])", f.name, g.name), 2, |ctx| {
        Ok(bracket_jets(&f.jets(&ctx.b, 2)?, &g.jets(&ctx.b, 2)?, ctx.bracket_ctx()?))
    })
}

fn prequantum_with(qd: &QuantumData, geom: &GridGeom, label: &str, order: usize, jets: impl Fn(&HCtx) -> Result<SfJets> + Sync) -> Result<GridOperator> {
    let locals: Result<Vec<Local>> = geom
        .nodes
        .par_iter()
        .enumerate()
        .map(|(n, g)| {
            let ctx = HCtx::new(&qd.bg, &geom.layout.point(n), order)?;
            let h = from_special_jets(&jets(&ctx)?, &ctx)?;
            let x = h.x_value();
            let ymat = cm_value(&h.y);
            let f0 = x[0];
            let mut l = Local::zero();
            for i in 0..3 {
                l.d1[i] = I * x[i + 1];
            }
            let one = SpinMatrix::identity();
            let inner = -ymat + one * (I * (f0 * g.a[0])) - one * Complex64::new(f0 * g.half_dlog[0], 0.0) + g.c[0] * Complex64::new(f0, 0.0);
            l.m0 = inner * I;
            if f0 != 0.0 {
                l = l.plus(&laplacian_local(g, &geom.phys).scaled(Complex64::new(-0.5 * f0, 0.0)));
            }
            Ok(l)
        })
        .collect();
    Ok(GridOperator::from_locals(label, true, &geom.layout, &locals?))
}

/// Closed-form named operators, coded directly from their coordinate displays.
pub mod named {
    use super::*;

    /// `x̂^λ ψ = x^λ ψ`.
    pub fn position(geom: &GridGeom, l: usize) -> GridOperator {
        let locals: Vec<Local> = (0..geom.layout.len()).map(|n| Local::mul(SpinMatrix::identity() * Complex64::new(geom.layout.point(n).x[l], 0.0))).collect();
        GridOperator::from_locals(&format!("x{l}"), true, &geom.layout, &locals)
    }

    /// `P̂_i ψ = −i(∂_iψ − C_iψ + (∂_i√|g| / 2√|g|)ψ)`, `i` in 1..=3.
    pub fn momentum(geom: &GridGeom, i: usize) -> GridOperator {
        let locals: Vec<Local> = geom
            .nodes
            .iter()
            .map(|g| {
                let mut l = Local::zero();
                l.d1[i - 1] = -I;
                l.m0 = (g.c[i] - SpinMatrix::identity() * Complex64::new(g.half_dlog[i], 0.0)) * I;
                l
            })
            .collect();
        GridOperator::from_locals(&format!("P{i}"), true, &geom.layout, &locals)
    }

    /// `Ĥ₀′ψ = −½Δ₀ψ − A₀ψ + ½u₀μB^iσ_iψ`.
    pub fn energy_prime(geom: &GridGeom) -> GridOperator {
        let p = geom.phys;
        let locals: Vec<Local> = geom
            .nodes
            .iter()
            .map(|g| {
                let mut m = SpinMatrix::identity() * Complex64::new(-g.a[0], 0.0);
                for k in 0..3 {
                    m += sigma(k + 1) * Complex64::new(0.5 * p.u0 * p.mu * g.b[k], 0.0);
                }
                laplacian_local(g, &p).scaled(Complex64::new(-0.5, 0.0)).plus(&Local::mul(m))
            })
            .collect();
        GridOperator::from_locals("H0prime", true, &geom.layout, &locals)
    }

    /// `n̂ψ = −½ n^i σ_i ψ` for frame components `n`.
    pub fn spin(geom: &GridGeom, n: impl Fn(&EvalPoint) -> [f64; 3]) -> GridOperator {
        let locals: Vec<Local> = (0..geom.layout.len())
            .map(|k| {
                let v = n(&geom.layout.point(k));
                let mut m = SpinMatrix::zeros();
                for i in 0..3 {
                    m += sigma(i + 1) * Complex64::new(-0.5 * v[i], 0.0);
                }
                Local::mul(m)
            })
            .collect();
        GridOperator::from_locals("spin_n", true, &geom.layout, &locals)
    }
}

/// One row of an evolution record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub norm: f64,
    pub s: [f64; 3],
    pub w: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub psi: SpinorGrid,
    pub max_iterations: usize,
    pub max_residual: f64,
}

impl Trajectory {
    /// `max_n |⟨ψ_n,ψ_n⟩ − ⟨ψ₀,ψ₀⟩| / ⟨ψ₀,ψ₀⟩`.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.records[0].norm;
        self.records.iter().map(|r| (r.norm - n0).abs() / n0).fold(0.0, f64::max)
    }
}

fn nrm2(a: &[Spinor]) -> f64 {
    a.iter().map(|x| x[0].norm_sqr() + x[1].norm_sqr()).sum()
}

fn axpy(y: &mut [Spinor], a: Complex64, x: &[Spinor]) {
    for (u, v) in y.iter_mut().zip(x) {
        u[0] += a * v[0];
        u[1] += a * v[1];
    }
}

/// Solves `A x = b` by conjugate gradients on the normal equations, starting from `x`.
/// Returns `(iterations, relative residual)`.
fn cgnr(a: &GridOperator, ah: &GridOperator, b: &[Spinor], x: &mut [Spinor]) -> Result<(usize, f64)> {
    const MAX_IT: usize = 500;
    let bn = nrm2(b).sqrt();
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = [Complex64::new(0.0, 0.0); 2]);
        return Ok((0, 0.0));
    }
    let mut r: Vec<Spinor> = b.to_vec();
    axpy(&mut r, Complex64::new(-1.0, 0.0), &a.apply_raw(x));
    let mut s = ah.apply_raw(&r);
    let mut p = s.clone();
    let mut gamma = nrm2(&s);
    let mut best = nrm2(&r).sqrt() / bn;
    let mut stall = 0;
    let mut it = 0;
    while it < MAX_IT && best > 1e-15 && gamma > 0.0 {
        it += 1;
        let q = a.apply_raw(&p);
        let alpha = gamma / nrm2(&q);
        axpy(x, Complex64::new(alpha, 0.0), &p);
        axpy(&mut r, Complex64::new(-alpha, 0.0), &q);
        s = ah.apply_raw(&r);
        let g2 = nrm2(&s);
        let beta = g2 / gamma;
        gamma = g2;
        for (pi, si) in p.iter_mut().zip(&s) {
            pi[0] = si[0] + beta * pi[0];
            pi[1] = si[1] + beta * pi[1];
        }
        let rel = nrm2(&r).sqrt() / bn;
        if rel < best * 0.999 {
            best = rel;
            stall = 0;
        } else {
            stall += 1;
            if stall >= 5 {
                break;
            }
        }
    }
    let mut tr = b.to_vec();
    axpy(&mut tr, Complex64::new(-1.0, 0.0), &a.apply_raw(x));
    let rel = nrm2(&tr).sqrt() / bn;
    if rel > 1e-12 {
        return Err(CqmError::SolverDivergence(rel));
    }
    Ok((it, rel))
}

/// Cayley steps `(1 + i dt/2 H)ψ_{n+1} = (1 − i dt/2 H)ψ_n`, recording norm, spin and widths.
pub fn evolve_pauli(qd: &QuantumData, geom: &GridGeom, psi0: &SpinorGrid, dt: f64, steps: usize) -> Result<Trajectory> {
    let h = pauli_generator(qd, geom)?;
    evolve_with(&h, geom, psi0, dt, steps)
}

pub fn evolve_with(h: &GridOperator, geom: &GridGeom, psi0: &SpinorGrid, dt: f64, steps: usize) -> Result<Trajectory> {
    check_layout(&geom.layout, &psi0.layout)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CqmError::Domain(format!("time step {dt}")));
    }
    let half = I * (0.5 * dt);
    let one = Complex64::new(1.0, 0.0);
    let a = h.affine(one, half);
    let ah = a.adjoint();
    let rhs = h.affine(one, -half);
    let t0 = psi0.layout.time;
    let record = |step: usize, psi: &SpinorGrid| -> Result<StepRecord> {
        Ok(StepRecord { step, time: t0 + step as f64 * dt, norm: geom.norm_sq(psi)?, s: geom.spin_expectation(psi)?, w: geom.widths(psi)? })
    };
    let mut psi = psi0.clone();
    let mut records = vec![record(0, &psi)?];
    let (mut max_it, mut max_res) = (0, 0.0f64);
    for step in 1..=steps {
        let b = rhs.apply_raw(&psi.psi);
        let mut x = psi.psi.clone();
        let (it, res) = cgnr(&a, &ah, &b, &mut x)?;
        max_it = max_it.max(it);
        max_res = max_res.max(res);
        psi.psi = x;
        records.push(record(step, &psi)?);
    }
    psi.layout.time = t0 + steps as f64 * dt;
    Ok(Trajectory { records, psi, max_iterations: max_it, max_residual: max_res })
}

/// Dominant angular frequency of a uniformly sampled signal: Hann window, 16× zero padding
/// and parabolic interpolation of the peak.
pub fn dominant_frequency(samples: &[f64], dt: f64) -> Result<f64> {
    let n = samples.len();
    if n < 8 {
        return Err(CqmError::Domain(format!("need at least 8 samples, got {n}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let len = (n * 16).next_power_of_two();
    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); len];
    for (k, s) in samples.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
        buf[k] = Complex64::new((s - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mag: Vec<f64> = buf[..len / 2].iter().map(|c| c.norm()).collect();
    let (k, _) = mag.iter().enumerate().skip(1).fold((1, 0.0), |(bk, bv), (k, &v)| if v > bv { (k, v) } else { (bk, bv) });
    let delta = if k + 1 < mag.len() {
        let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
        let den = a - 2.0 * b + c;
        if den != 0.0 {
            0.5 * (a - c) / den
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(2.0 * std::f64::consts::PI * (k as f64 + delta) / (len as f64 * dt))
}

/// Analytic width of a free Gaussian packet with initial standard deviation `s0` and diffusivity `d`.
pub fn gaussian_width(s0: f64, d: f64, t: f64) -> f64 {
    s0 * (1.0 + (d * t / (s0 * s0)).powi(2)).sqrt()
}
