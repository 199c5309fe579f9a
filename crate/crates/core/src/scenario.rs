//! JSON scenario files: background, observers, special functions, grid and suite parameters.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::background::{standard_constants, Background, Observer};
use crate::error::{CqmError, Result};
use crate::expr::Constants;
use crate::quantum::{Axis, GridGeom, Layout, SpinorGrid};
use crate::special::SpecialFunction;
use crate::units::Dim;

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum DimSpec {
    Named(String),
    Exponents(Dim),
}

impl DimSpec {
    pub fn resolve(&self) -> Result<Dim> {
        match self {
            DimSpec::Exponents(d) => Ok(*d),
            DimSpec::Named(n) => match n.as_str() {
                "none" => Ok(Dim::NONE),
                "length" => Ok(Dim::length()),
                "time" => Ok(Dim::time()),
                "mass" => Ok(Dim::mass()),
                "hbar" => Ok(Dim::hbar()),
                "mu" => Ok(Dim::mu()),
                "magnetic" => Ok(Dim::magnetic()),
                "em_form" => Ok(Dim::em_form()),
                "charge" => Ok(Dim::charge()),
                other => Err(CqmError::Scenario(format!("unknown dimension name '{other}'"))),
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantSpec {
    pub value: f64,
    #[serde(default)]
    pub dim: Option<DimSpec>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSpec {
    pub m: f64,
    pub q: f64,
    pub hbar: f64,
    pub mu: f64,
    pub u0: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSpec {
    pub name: String,
    pub v: [String; 3],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub name: String,
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub f0: Option<String>,
    #[serde(default)]
    pub fi: Option<[String; 3]>,
    #[serde(default)]
    pub fbrev: Option<String>,
    #[serde(default)]
    pub phi: Option<[String; 3]>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFunctions {
    pub count: usize,
    pub degree: u32,
}

impl Default for RandomFunctions {
    fn default() -> Self {
        RandomFunctions { count: 3, degree: 2 }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub background: f64,
    pub jacobi: f64,
    pub isomorphism: f64,
    pub observer: f64,
    pub curvature: f64,
    pub operators: f64,
    pub round_trip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { background: 1e-10, jacobi: 1e-8, isomorphism: 1e-9, observer: 1e-11, curvature: 1e-9, operators: 1e-10, round_trip: 1e-10 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// `[min, max, n]` per spatial axis.
    pub axes: [(f64, f64, usize); 3],
    #[serde(default)]
    pub time: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Psi0Spec {
    /// Two components as `[re, im]` pairs.
    pub spinor: [[f64; 2]; 2],
    #[serde(default)]
    pub center: [f64; 3],
    /// Standard deviation of `|ψ|²` per axis; `null` for a constant profile.
    #[serde(default)]
    pub sigma: [Option<f64>; 3],
    #[serde(default)]
    pub k: [f64; 3],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    pub steps: usize,
    pub dt: f64,
    #[serde(default)]
    pub uniform_b: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_box")]
    pub sample_box: [[f64; 2]; 4],
    pub physical: PhysicalSpec,
    #[serde(default)]
    pub constants: BTreeMap<String, ConstantSpec>,
    /// Keys `"ij"` with `1 ≤ i ≤ j ≤ 3`.
    #[serde(default)]
    pub metric: BTreeMap<String, String>,
    #[serde(default)]
    pub levi_civita: bool,
    /// Keys `"i_lm"`: `K^i_{lm}`.
    #[serde(default)]
    pub kgrav: BTreeMap<String, String>,
    /// Keys `"lm"`: `F_{lm}`.
    #[serde(default)]
    pub f: BTreeMap<String, String>,
    /// Keys `"l"`: `A_l`.
    #[serde(default)]
    pub potential: BTreeMap<String, String>,
    #[serde(default)]
    pub observers: Vec<ObserverSpec>,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
    #[serde(default)]
    pub random_functions: RandomFunctions,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub psi0: Option<Psi0Spec>,
    #[serde(default)]
    pub evolve: Option<EvolveSpec>,
}

fn default_samples() -> usize {
    100
}

fn default_box() -> [[f64; 2]; 4] {
    [[-1.0, 1.0]; 4]
}

/// A loaded, validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub background: Background,
    pub observers: Vec<Observer>,
    pub functions: BTreeMap<String, SpecialFunction>,
}

fn digits(key: &str, what: &str, n: usize) -> Result<Vec<usize>> {
    let d: Vec<usize> = key.chars().filter_map(|c| c.to_digit(10).map(|d| d as usize)).collect();
    if d.len() != n || key.chars().any(|c| !c.is_ascii_digit() && c != '_') {
        return Err(CqmError::Scenario(format!("{what}: bad index key '{key}'")));
    }
    Ok(d)
}

fn ctx<T>(r: Result<T>, at: &str) -> Result<T> {
    r.map_err(|e| CqmError::Scenario(format!("{at}: {e}")))
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| CqmError::Scenario(format!("{}: {e}", path.display())))?;
        Scenario::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| CqmError::Scenario(format!("line {} column {}: {e}", e.line(), e.column())))?;
        Scenario::build(file)
    }

    pub fn build(file: ScenarioFile) -> Result<Scenario> {
        let p = file.physical;
        let mut constants: Constants = ctx(standard_constants(p.m, p.q, p.hbar, p.mu, p.u0), "physical")?;
        for (name, c) in &file.constants {
            let dim = match &c.dim {
                Some(d) => ctx(d.resolve(), &format!("constants.{name}"))?,
                None => Dim::NONE,
            };
            constants = ctx(constants.with(name, c.value, dim), &format!("constants.{name}"))?;
        }
        let mut bg = Background::flat(constants)?;
        for (k, src) in &file.metric {
            let d = digits(k, "metric", 2)?;
            bg = ctx(bg.with_metric(d[0], d[1], src), &format!("metric.{k}"))?;
        }
        if file.levi_civita {
            bg = ctx(bg.with_levi_civita(true), "levi_civita")?;
        }
        for (k, src) in &file.kgrav {
            let d = digits(k, "kgrav", 3)?;
            bg = ctx(bg.with_kgrav(d[0], d[1], d[2], src), &format!("kgrav.{k}"))?;
        }
        for (k, src) in &file.f {
            let d = digits(k, "f", 2)?;
            bg = ctx(bg.with_f(d[0], d[1], src), &format!("f.{k}"))?;
        }
        for (k, src) in &file.potential {
            let d = digits(k, "potential", 1)?;
            bg = ctx(bg.with_potential(d[0], src), &format!("potential.{k}"))?;
        }
        let observers = file
            .observers
            .iter()
            .map(|o| ctx(Observer::parse(&o.name, [&o.v[0], &o.v[1], &o.v[2]], &bg.constants), &format!("observers.{}", o.name)))
            .collect::<Result<Vec<_>>>()?;
        let mut functions = BTreeMap::new();
        for f in &file.functions {
            let sf = ctx(function(f, &bg), &format!("functions.{}", f.name))?;
            if functions.insert(f.name.clone(), sf).is_some() {
                return Err(CqmError::Scenario(format!("functions.{}: duplicate name", f.name)));
            }
        }
        if let Some(g) = &file.grid {
            ctx(layout(g), "grid")?;
        }
        if file.samples == 0 {
            return Err(CqmError::Scenario("samples: must be positive".into()));
        }
        Ok(Scenario { file, background: bg, observers, functions })
    }

    /// Table entry or builtin (`x0..x3`, `P1..P3`, `H0`, `H0prime`).
    pub fn function(&self, name: &str) -> Result<SpecialFunction> {
        self.functions
            .get(name)
            .cloned()
            .or_else(|| SpecialFunction::builtin(name, &self.background))
            .ok_or_else(|| CqmError::UnknownIdentifier(name.to_string()))
    }

    pub fn layout(&self) -> Result<Layout> {
        match &self.file.grid {
            Some(g) => layout(g),
            None => Err(CqmError::Scenario("grid: missing".into())),
        }
    }

    /// Initial wave function, normalised in the weighted inner product.
    pub fn psi0(&self, geom: &GridGeom) -> Result<SpinorGrid> {
        let spec = self.file.psi0.as_ref().ok_or_else(|| CqmError::Scenario("psi0: missing".into()))?;
        let s = spec.spinor.map(|[re, im]| Complex64::new(re, im));
        let g = SpinorGrid::from_fn(geom.layout, |x| {
            let mut amp = Complex64::new(0.0, 0.0);
            for i in 0..3 {
                let d = x[i + 1] - spec.center[i];
                if let Some(sig) = spec.sigma[i] {
                    amp -= Complex64::new(d * d / (4.0 * sig * sig), 0.0);
                }
                amp += Complex64::new(0.0, spec.k[i] * d);
            }
            let e = amp.exp();
            [s[0] * e, s[1] * e]
        });
        geom.normalized(&g)
    }
}

fn layout(g: &GridSpec) -> Result<Layout> {
    let axes = g.axes.iter().map(|&(a, b, n)| if n == 1 { Ok(Axis::inactive(a)) } else { Axis::new(a, b, n) }).collect::<Result<Vec<_>>>()?;
    Layout::new([axes[0], axes[1], axes[2]], g.time)
}

fn function(f: &FunctionSpec, bg: &Background) -> Result<SpecialFunction> {
    if let Some(b) = &f.builtin {
        if f.f0.is_some() || f.fi.is_some() || f.fbrev.is_some() {
            return Err(CqmError::Scenario("builtin functions take no scalar components".into()));
        }
        if b == "spin" {
            let n = f.phi.as_ref().ok_or_else(|| CqmError::Scenario("spin builtin needs phi".into()))?;
            let mut s = SpecialFunction::spin([&n[0], &n[1], &n[2]], &bg.constants)?;
            s.name = f.name.clone();
            return Ok(s);
        }
        let mut s = SpecialFunction::builtin(b, bg).ok_or_else(|| CqmError::UnknownIdentifier(b.clone()))?;
        s.name = f.name.clone();
        return Ok(s);
    }
    let zero = || "0".to_string();
    let fi = f.fi.clone().unwrap_or_else(|| [zero(), zero(), zero()]);
    let phi = f.phi.clone().unwrap_or_else(|| [zero(), zero(), zero()]);
    SpecialFunction::parse(
        &f.name,
        f.f0.as_deref().unwrap_or("0"),
        [&fi[0], &fi[1], &fi[2]],
        f.fbrev.as_deref().unwrap_or("0"),
        [&phi[0], &phi[1], &phi[2]],
        &bg.constants,
    )
}
