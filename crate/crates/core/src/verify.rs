//! Property suites over a scenario and their JSON report.

use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::background::{eps, magnetic_field, Coupling, Observer};
use crate::error::{CqmError, Result};
use crate::hermitian::*;
use crate::jet::EvalPoint;
use crate::pauli::{spin_connection_from, spin_curvature};
use crate::quantum::*;
use crate::sampling;
use crate::scenario::Scenario;
use crate::special::{bracket_jets, jacobi_residual, SpecialFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Background,
    Jacobi,
    Isomorphism,
    Observer,
    Curvature,
    Operators,
}

impl Suite {
    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Background => "background",
            Suite::Jacobi => "jacobi",
            Suite::Isomorphism => "isomorphism",
            Suite::Observer => "observer",
            Suite::Curvature => "curvature",
            Suite::Operators => "operators",
        }
    }

    pub const ALL: [Suite; 6] = [Suite::Background, Suite::Jacobi, Suite::Isomorphism, Suite::Observer, Suite::Curvature, Suite::Operators];
}

impl FromStr for Suite {
    type Err = CqmError;
    fn from_str(s: &str) -> Result<Suite> {
        Ok(match s {
            "background" => Suite::Background,
            "jacobi" => Suite::Jacobi,
            "isomorphism" => Suite::Isomorphism,
            "observer" => Suite::Observer,
            "curvature" => Suite::Curvature,
            "operators" => Suite::Operators,
            other => return Err(CqmError::UnknownIdentifier(format!("suite '{other}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, samples: usize, max_residual: f64, tolerance: f64) -> Check {
        Check { name: name.to_string(), samples, max_residual, tolerance, pass: max_residual.is_finite() && max_residual < tolerance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl Report {
    pub fn table(&self) -> String {
        let mut s = format!("scenario {} (seed {}, {} samples)\n", self.scenario, self.seed, self.samples);
        for c in &self.checks {
            s += &format!(
                "{:<6} {:<36} {:>5}  max {:>10.3e}  tol {:>8.1e}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.samples,
                c.max_residual,
                c.tolerance
            );
        }
        for w in &self.warnings {
            s += &format!("warning: {w}\n");
        }
        s += if self.pass { "overall: PASS\n" } else { "overall: FAIL\n" };
        s
    }
}

fn max_over<T: Sync>(items: &[T], f: impl Fn(&T) -> Result<f64> + Sync + Send) -> Result<f64> {
    let per: Vec<Result<f64>> = items.par_iter().map(f).collect();
    per.into_iter().try_fold(0.0f64, |m, r| {
        let r = r?;
        Ok(if r.is_nan() { f64::NAN } else { m.max(r) })
    })
}

struct Run<'a> {
    scn: &'a Scenario,
    seed: u64,
    points: Vec<EvalPoint>,
    functions: Vec<SpecialFunction>,
    warnings: Vec<String>,
}

impl<'a> Run<'a> {
    fn new(scn: &'a Scenario, samples: usize, seed: u64) -> Result<Run<'a>> {
        let points = sampling::points(&mut sampling::rng(seed), scn.file.sample_box, samples);
        let mut r = sampling::rng(seed.wrapping_add(1));
        let rf = scn.file.random_functions;
        let mut functions = (0..rf.count).map(|k| sampling::special_function(&mut r, &format!("R{k}"), rf.degree, true, true)).collect::<Result<Vec<_>>>()?;
        let mut warnings = Vec::new();
        for f in scn.functions.values() {
            if f.f0_is_spatial() {
                warnings.push(format!("function {} has spatially varying f0; excluded from bracket suites", f.name));
            } else {
                functions.push(f.clone());
            }
        }
        Ok(Run { scn, seed, points, functions, warnings })
    }

    fn background(&mut self) -> Result<Vec<Check>> {
        let tol = self.scn.file.tolerances.background;
        let r = self.scn.background.validate(&self.points)?;
        let n = self.points.len();
        let pr = QuantumData::new(self.scn.background.clone()).potential_residual(&self.points)?;
        if pr > 1e-8 {
            self.warnings.push(format!("potential is not a potential of Phi (max |dA - Phi| = {pr:.3e})"));
        }
        Ok(vec![
            Check::new("background.closed_f", n, r.closed_f, tol),
            Check::new("background.curvature_symmetry", n, r.curvature_symmetry, tol),
            Check::new("background.metricity (nabla g)", n, r.metricity, tol),
            Check::new("background.torsion", n, r.torsion, tol),
        ])
    }

    fn triples(&self) -> Vec<[usize; 3]> {
        let n = self.functions.len();
        match n {
            0..=2 => Vec::new(),
            3 => vec![[0, 1, 2]],
            _ => (0..n).map(|i| [i, (i + 1) % n, (i + 2) % n]).collect(),
        }
    }

    fn pairs(&self) -> Vec<[usize; 2]> {
        let n = self.functions.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| [i, j])).collect()
    }

    fn jacobi(&self) -> Result<Vec<Check>> {
        let bg = &self.scn.background;
        let triples = self.triples();
        let worst = max_over(&self.points, |p| {
            triples.iter().try_fold(0.0f64, |m, t| {
                let f = &self.functions;
                Ok(m.max(jacobi_residual(&f[t[0]], &f[t[1]], &f[t[2]], bg, p)?))
            })
        })?;
        Ok(vec![Check::new("jacobi.cyclic_sum", self.points.len() * triples.len(), worst, self.scn.file.tolerances.jacobi)])
    }

    fn isomorphism(&self) -> Result<Vec<Check>> {
        let bg = &self.scn.background;
        let pairs = self.pairs();
        let f = &self.functions;
        let per: Vec<Result<[f64; 3]>> = self
            .points
            .par_iter()
            .map(|p| {
                let ctx = HCtx::new(bg, p, 3)?;
                let bc = ctx.bracket_ctx()?;
                let jets = f.iter().map(|g| g.jets(&ctx.b, 3)).collect::<Result<Vec<_>>>()?;
                let fields = jets.iter().map(|j| from_special_jets(j, &ctx)).collect::<Result<Vec<_>>>()?;
                let mut w = [0.0f64; 3];
                for [i, j] in &pairs {
                    let lhs = from_special_jets(&bracket_jets(&jets[*i], &jets[*j], bc), &ctx)?;
                    let rhs = lie_bracket_y(&fields[*i], &fields[*j]);
                    w[0] = w[0].max(lhs.max_abs_diff(&rhs));
                    let (va, vb) = (vertical_projection(&fields[*i], &ctx, None), vertical_projection(&fields[*j], &ctx, None));
                    let (x, m) = pair_bracket((&fields[*i].x, &va), (&fields[*j].x, &vb), &ctx)?;
                    let back = HJets { x, y: cm_add(&m, &connection_lift(&x, &ctx, None).y) };
                    w[1] = w[1].max(back.max_abs_diff(&rhs));
                }
                for (g, h) in f.iter().zip(&fields) {
                    let rebuilt = HJets { x: h.x, y: cm_add(&connection_lift(&h.x, &ctx, None).y, &vertical_projection(h, &ctx, None)) };
                    w[2] = w[2].max(rebuilt.max_abs_diff(h));
                    let s = to_special(h, &ctx, Provenance::FromSpecial)?;
                    w[2] = w[2].max(s.max_abs_diff(&g.jets(&ctx.b, 0)?.value()));
                }
                Ok(w)
            })
            .collect();
        let mut w = [0.0f64; 3];
        for r in per {
            let r = r?;
            for k in 0..3 {
                w[k] = w[k].max(r[k]);
            }
        }
        let t = self.scn.file.tolerances;
        let n = self.points.len();
        Ok(vec![
            Check::new("isomorphism.dual_route", n * pairs.len(), w[1], t.round_trip),
            Check::new("isomorphism.bracket_homomorphism", n * pairs.len(), w[0], t.isomorphism),
            Check::new("isomorphism.round_trip", n * f.len(), w[2], t.round_trip),
        ])
    }

    fn observers(&self) -> Result<Vec<Observer>> {
        if !self.scn.observers.is_empty() {
            return Ok(self.scn.observers.clone());
        }
        let mut r = sampling::rng(self.seed.wrapping_add(2));
        (0..5)
            .map(|k| {
                let e = [0, 1, 2].map(|_| sampling::polynomial(&mut r, &[0, 1, 2, 3], 1).to_string());
                Observer::parse(&format!("random{k}"), [&e[0], &e[1], &e[2]], &self.scn.background.constants)
            })
            .collect()
    }

    fn observer(&self) -> Result<Vec<Check>> {
        let bg = &self.scn.background;
        let obs = self.observers()?;
        let reference = Observer::reference();
        let worst = max_over(&self.points, |p| {
            let mut m = 0.0f64;
            for f in &self.functions {
                let base = invariant_combination(f, bg, &reference, p)?;
                for o in &obs {
                    m = m.max((invariant_combination(f, bg, o, p)? - base).abs() / base.abs().max(1.0));
                }
            }
            Ok(m)
        })?;
        Ok(vec![Check::new("observer.invariance", self.points.len() * obs.len(), worst, self.scn.file.tolerances.observer)])
    }

    fn curvature(&self) -> Result<Vec<Check>> {
        let bg = &self.scn.background;
        let per: Vec<Result<[f64; 2]>> = self
            .points
            .par_iter()
            .map(|p| {
                let b = bg.jets(p, 3)?;
                let c = spin_connection_from(&b, Coupling::Moment)?;
                let r = spin_curvature(&c);
                let rho = b.rho(Coupling::Moment)?;
                let rt = b.rcheck(Coupling::Moment)?;
                let mut w = [0.0f64; 2];
                for l in 0..4 {
                    for m in 0..4 {
                        for k in 0..3 {
                            w[0] = w[0].max((r[l][m][k].value() - rho[l][m][k].value()).abs());
                            for j in 0..3 {
                                let s: f64 = (0..3).map(|i| r[l][m][i].value() * eps(i, j, k)).sum();
                                w[1] = w[1].max((rt[l][m][k][j].value() - s).abs());
                            }
                        }
                    }
                }
                Ok(w)
            })
            .collect();
        let mut w = [0.0f64; 2];
        for r in per {
            let r = r?;
            w[0] = w[0].max(r[0]);
            w[1] = w[1].max(r[1]);
        }
        let t = self.scn.file.tolerances;
        let n = self.points.len();
        Ok(vec![Check::new("curvature.rc_equals_rho", n, w[0], t.curvature), Check::new("curvature.rtilde_relation", n, w[1], t.round_trip)])
    }

    fn operators(&mut self) -> Result<Vec<Check>> {
        let layout = match &self.scn.file.grid {
            Some(_) => self.scn.layout()?,
            None => Layout::new([Axis::new(-1.0, 1.0, 8)?; 3], 0.0)?,
        };
        let qd = QuantumData::new(self.scn.background.clone());
        let geom = qd.geometry(&layout)?;
        let mut r = sampling::rng(self.seed.wrapping_add(3));
        let mut rand_grid = || {
            let mut g = SpinorGrid::zeros(layout);
            for p in g.psi.iter_mut() {
                *p = [Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)), Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))];
            }
            g
        };
        let (psi, a, b) = (rand_grid(), rand_grid(), rand_grid());
        let tol = self.scn.file.tolerances.operators;
        let bg = &self.scn.background;
        let mut named_ops: Vec<(SpecialFunction, GridOperator)> = (0..4).map(|l| (SpecialFunction::coordinate(l), named::position(&geom, l))).collect();
        for i in 1..=3 {
            named_ops.push((SpecialFunction::momentum(i), named::momentum(&geom, i)));
        }
        named_ops.push((SpecialFunction::spin(["0", "0", "1"], &bg.constants)?, named::spin(&geom, |_| [0.0, 0.0, 1.0])));
        let mut worst = 0.0f64;
        for (f, op) in &named_ops {
            let d = prequantum(&qd, &geom, f)?.apply(&psi)?.max_abs_diff(&op.apply(&psi)?)?;
            worst = worst.max(d / psi.max_abs());
        }
        let n = layout.len();
        let mut checks = vec![Check::new("operators.named", n * named_ops.len(), worst, tol)];
        let h0 = prequantum(&qd, &geom, &SpecialFunction::energy_prime(bg))?;
        let scale = h0.apply(&psi)?.max_abs().max(1.0);
        match pauli_generator(&qd, &geom) {
            Ok(h) => {
                let d = h.apply(&psi)?.max_abs_diff(&h0.apply(&psi)?)? / scale;
                checks.push(Check::new("operators.generator_lock", n, d, tol));
            }
            Err(CqmError::NonStaticMetric(v)) => self.warnings.push(format!("generator lock skipped: metric not static ({v:.3e})")),
            Err(e) => return Err(e),
        }
        let (al, be) = (Complex64::new(0.3, -1.1), Complex64::new(-0.8, 0.5));
        let mut lin = 0.0f64;
        for f in self.functions.iter().take(3) {
            let o = prequantum(&qd, &geom, f)?;
            let lhs = o.apply(&a.scale(al).add(&b.scale(be))?)?;
            let rhs = o.apply(&a)?.scale(al).add(&o.apply(&b)?.scale(be))?;
            lin = lin.max(lhs.max_abs_diff(&rhs)? / lhs.max_abs().max(1.0));
        }
        checks.push(Check::new("operators.linearity", n, lin, 1e-12));
        Ok(checks)
    }
}

/// Runs the requested suites; checks are sorted by name.
pub fn run_suites(scn: &Scenario, suites: &[Suite], samples: Option<usize>, seed: Option<u64>) -> Result<Report> {
    let samples = samples.unwrap_or(scn.file.samples);
    let seed = seed.unwrap_or(scn.file.seed);
    let mut run = Run::new(scn, samples, seed)?;
    let mut suites = suites.to_vec();
    suites.sort();
    suites.dedup();
    let mut checks = Vec::new();
    for s in suites {
        let out = match s {
            Suite::Background => run.background(),
            Suite::Jacobi => run.jacobi(),
            Suite::Isomorphism => run.isomorphism(),
            Suite::Observer => run.observer(),
            Suite::Curvature => run.curvature(),
            Suite::Operators => run.operators(),
        };
        match out {
            Ok(c) => checks.extend(c),
            Err(e) => {
                checks.push(Check { name: format!("{}.aborted", s.as_str()), samples: 0, max_residual: f64::INFINITY, tolerance: 0.0, pass: false });
                run.warnings.push(format!("{} suite aborted: {e}", s.as_str()));
            }
        }
    }
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let pass = checks.iter().all(|c| c.pass);
    Ok(Report { scenario: scn.file.name.clone(), seed, samples, checks, warnings: run.warnings, pass })
}

#[derive(Clone, Debug, Serialize)]
pub struct Frequency {
    pub measured: f64,
    pub expected: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolveSummary {
    pub scenario: String,
    pub steps: usize,
    pub dt: f64,
    pub final_time: f64,
    pub norm_drift: f64,
    pub max_solver_iterations: usize,
    pub max_solver_residual: f64,
    pub initial_width: [f64; 3],
    pub final_width: [f64; 3],
    pub frequency: Option<Frequency>,
}

/// Evolves `psi0` under the Pauli generator and summarises the trajectory.
pub fn run_evolve(scn: &Scenario, steps: usize, dt: f64) -> Result<(Trajectory, EvolveSummary)> {
    let layout = scn.layout()?;
    let qd = QuantumData::new(scn.background.clone());
    let geom = qd.geometry(&layout)?;
    let psi0 = scn.psi0(&geom)?;
    let t = evolve_pauli(&qd, &geom, &psi0, dt, steps)?;
    let uniform_b = scn.file.evolve.as_ref().is_some_and(|e| e.uniform_b);
    let frequency = if uniform_b && steps >= 8 {
        let b = magnetic_field(&scn.background, &layout.point(0))?;
        let p = scn.background.phys;
        let expected = p.u0 * p.mu * (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        let sx: Vec<f64> = t.records.iter().map(|r| r.s[0]).collect();
        let measured = dominant_frequency(&sx, dt)?;
        Some(Frequency { measured, expected, relative_error: (measured - expected).abs() / expected })
    } else {
        None
    };
    let last = t.records.last().expect("records");
    let summary = EvolveSummary {
        scenario: scn.file.name.clone(),
        steps,
        dt,
        final_time: last.time,
        norm_drift: t.norm_drift(),
        max_solver_iterations: t.max_iterations,
        max_solver_residual: t.max_residual,
        initial_width: t.records[0].w,
        final_width: last.w,
        frequency,
    };
    Ok((t, summary))
}
