//! Expression corpora with direct f64 oracles.

use cqm_core::expr::{parse, Constants, FieldDef};
use cqm_core::jet::{multi_index, EvalPoint, MAX_ORDER, NCOEFF};
use cqm_core::units::Dim;

pub type Oracle = fn(&[f64; 4]) -> f64;

pub const A: f64 = 0.7;
pub const C: f64 = 1.3;

pub fn constants() -> Constants {
    Constants::new().with("a", A, Dim::NONE).unwrap().with("c", C, Dim::NONE).unwrap()
}

pub fn points() -> Vec<EvalPoint> {
    [[0.3, 0.45, 0.8, 1.1], [1.2, 0.25, 0.6, 0.35], [0.5, 0.9, 0.2, 0.75], [0.85, 1.15, 1.05, 0.4]].into_iter().map(|x| EvalPoint::new(x).unwrap()).collect()
}

/// 50 expressions covering literals, precedence, unary minus, integer powers and every builtin.
pub fn parser_corpus() -> Vec<(&'static str, Oracle)> {
    vec![
        ("0", |_| 0.0),
        ("2.5", |_| 2.5),
        ("1.5e-3", |_| 1.5e-3),
        (".25", |_| 0.25),
        ("x0", |x| x[0]),
        ("x3", |x| x[3]),
        ("a", |_| A),
        ("-x1", |x| -x[1]),
        ("--x1", |x| x[1]),
        ("1 + 2*3", |_| 7.0),
        ("(1 + 2)*3", |_| 9.0),
        ("1 - 2 - 3", |_| -4.0),
        ("1 - (2 - 3)", |_| 2.0),
        ("8/4/2", |_| 1.0),
        ("8/(4/2)", |_| 4.0),
        ("x1*x2 + x3", |x| x[1] * x[2] + x[3]),
        ("x1*(x2 + x3)", |x| x[1] * (x[2] + x[3])),
        ("x1 - x2*x3/x0", |x| x[1] - x[2] * x[3] / x[0]),
        ("x1^2", |x| x[1] * x[1]),
        ("-x1^2", |x| -(x[1] * x[1])),
        ("(-x1)^2", |x| x[1] * x[1]),
        ("x2^3 - x2", |x| x[2] * x[2] * x[2] - x[2]),
        ("x1^-2", |x| (1.0 / x[1]) * (1.0 / x[1])),
        ("x1^0", |_| 1.0),
        ("2*x1^3*x2", |x| 2.0 * (x[1] * x[1] * x[1]) * x[2]),
        ("(x1 + x2)^2", |x| (x[1] + x[2]) * (x[1] + x[2])),
        ("sqrt(x1)", |x| x[1].sqrt()),
        ("exp(x2)", |x| x[2].exp()),
        ("log(x3)", |x| x[3].ln()),
        ("sin(x0)", |x| x[0].sin()),
        ("cos(x1)", |x| x[1].cos()),
        ("sin(x1)*cos(x2)", |x| x[1].sin() * x[2].cos()),
        ("exp(-x1*x1)", |x| (-(x[1] * x[1])).exp()),
        ("sqrt(1 + x1^2 + x2^2)", |x| (1.0 + x[1] * x[1] + x[2] * x[2]).sqrt()),
        ("log(1 + x1*x2)", |x| (1.0 + x[1] * x[2]).ln()),
        ("sin(cos(x3))", |x| x[3].cos().sin()),
        ("exp(sin(x1) - cos(x2))", |x| (x[1].sin() - x[2].cos()).exp()),
        ("a*x1 + c*x2", |x| A * x[1] + C * x[2]),
        ("a/c", |_| A / C),
        ("-a*x1^2/2", |x| -(A * (x[1] * x[1])) / 2.0),
        ("c*(x1 - a)^2", |x| C * ((x[1] - A) * (x[1] - A))),
        ("1/(1 + x1^2)", |x| 1.0 / (1.0 + x[1] * x[1])),
        ("x1/(x2*x3)", |x| x[1] / (x[2] * x[3])),
        ("x0*x1*x2*x3", |x| x[0] * x[1] * x[2] * x[3]),
        ("1 + 0.1*x0", |x| 1.0 + 0.1 * x[0]),
        ("0.005*x1^4 + 0.1*x1^2", |x| 0.005 * (x[1] * x[1] * x[1] * x[1]) + 0.1 * (x[1] * x[1])),
        ("(x1 - x2)*(x1 + x2)", |x| (x[1] - x[2]) * (x[1] + x[2])),
        ("sqrt(x1)^3", |x| {
            let s = x[1].sqrt();
            s * s * s
        }),
        ("exp(log(x2))", |x| x[2].ln().exp()),
        ("  x1 *\n (2 - x3)  ", |x| x[1] * (2.0 - x[3])),
    ]
}

/// 20 smooth expressions for derivative checks up to order 3.
pub fn jet_corpus() -> Vec<(&'static str, Oracle)> {
    vec![
        ("x1*x2*x3", |x| x[1] * x[2] * x[3]),
        ("x0^2*x1 - x3^3", |x| x[0] * x[0] * x[1] - x[3] * x[3] * x[3]),
        ("x1^4 + x2^5", |x| x[1].powi(4) + x[2].powi(5)),
        ("exp(x1 - 2*x2)", |x| (x[1] - 2.0 * x[2]).exp()),
        ("sin(x0*x1)", |x| (x[0] * x[1]).sin()),
        ("cos(x2 + x3^2)", |x| (x[2] + x[3] * x[3]).cos()),
        ("log(1 + x1^2 + x3)", |x| (1.0 + x[1] * x[1] + x[3]).ln()),
        ("sqrt(2 + x0*x2)", |x| (2.0 + x[0] * x[2]).sqrt()),
        ("1/(1 + x1^2 + x2^2)", |x| 1.0 / (1.0 + x[1] * x[1] + x[2] * x[2])),
        ("x1/x2", |x| x[1] / x[2]),
        ("x3^-2", |x| x[3].powi(-2)),
        ("exp(-x1*x1)*sin(x2)", |x| (-(x[1] * x[1])).exp() * x[2].sin()),
        ("a*x0*x1^2 + c*x2*x3", |x| A * x[0] * x[1] * x[1] + C * x[2] * x[3]),
        ("sin(x1)*cos(x2)*exp(x3)", |x| x[1].sin() * x[2].cos() * x[3].exp()),
        ("(x0 + x1 + x2 + x3)^3", |x| (x[0] + x[1] + x[2] + x[3]).powi(3)),
        ("log(x1)*sqrt(x2)", |x| x[1].ln() * x[2].sqrt()),
        ("exp(sin(x0) + cos(x3))", |x| (x[0].sin() + x[3].cos()).exp()),
        ("1/sqrt(1 + x0^2*x3^2)", |x| 1.0 / (1.0 + x[0] * x[0] * x[3] * x[3]).sqrt()),
        ("x2*exp(-c*x1)/(1 + a*x3)", |x| x[2] * (-C * x[1]).exp() / (1.0 + A * x[3])),
        ("sin(x1 + 2*x2 - x3)^2", |x| (x[1] + 2.0 * x[2] - x[3]).sin().powi(2)),
    ]
}

/// Central-difference estimate of the mixed partial `alpha`.
pub fn fd_derivative(f: Oracle, x: [f64; 4], alpha: [u8; 4], h: f64) -> f64 {
    match (0..4).find(|&v| alpha[v] > 0) {
        None => f(&x),
        Some(v) => {
            let mut rest = alpha;
            rest[v] -= 1;
            let (mut xp, mut xm) = (x, x);
            xp[v] += h;
            xm[v] -= h;
            (fd_derivative(f, xp, rest, h) - fd_derivative(f, xm, rest, h)) / (2.0 * h)
        }
    }
}

/// Outcome of the parser corpus: round-trip failures and worst relative oracle error.
pub struct ParserOutcome {
    pub count: usize,
    pub round_trip_failures: Vec<String>,
    pub max_rel_error: f64,
}

pub fn check_parser_corpus() -> ParserOutcome {
    let c = constants();
    let corpus = parser_corpus();
    let mut out = ParserOutcome { count: corpus.len(), round_trip_failures: Vec::new(), max_rel_error: 0.0 };
    for (src, oracle) in corpus {
        let e = parse(src).unwrap_or_else(|err| panic!("{src}: {err}"));
        let printed = e.to_string();
        if parse(&printed).ok().as_ref() != Some(&e) {
            out.round_trip_failures.push(format!("{src} -> {printed}"));
        }
        let f = FieldDef::new(src, Dim::NONE, e, &c).unwrap_or_else(|err| panic!("{src}: {err}"));
        for p in points() {
            let (got, want) = (f.value(&p).unwrap(), oracle(&p.x));
            out.max_rel_error = out.max_rel_error.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    out
}

/// Outcome of the jet corpus over every slot of order ≤ 3.
pub struct JetOutcome {
    pub count: usize,
    pub comparisons: usize,
    /// Smallest error ratio err(h)/err(h/2) among slots whose finite-difference error is resolvable.
    pub min_ratio: f64,
    pub worst: String,
    /// Largest relative error at the fine step.
    pub max_fine_error: f64,
}

pub const JET_H: f64 = 0.01;
const RESOLVABLE: f64 = 1e-7;

pub fn check_jet_corpus() -> JetOutcome {
    let c = constants();
    let corpus = jet_corpus();
    let mut out = JetOutcome { count: corpus.len(), comparisons: 0, min_ratio: f64::INFINITY, worst: String::new(), max_fine_error: 0.0 };
    for (src, oracle) in corpus {
        let f = FieldDef::parse(src, Dim::NONE, src, &c).unwrap_or_else(|err| panic!("{src}: {err}"));
        for p in points() {
            let jet = f.eval(&p, MAX_ORDER).unwrap();
            for s in 0..NCOEFF {
                let alpha = multi_index(s);
                let d = jet.derivative(alpha).unwrap();
                let scale = d.abs().max(1.0);
                let coarse = (fd_derivative(oracle, p.x, alpha, JET_H) - d).abs() / scale;
                let fine = (fd_derivative(oracle, p.x, alpha, JET_H / 2.0) - d).abs() / scale;
                out.comparisons += 1;
                out.max_fine_error = out.max_fine_error.max(fine);
                if coarse > RESOLVABLE {
                    let r = coarse / fine;
                    if r < out.min_ratio {
                        out.min_ratio = r;
                        out.worst = format!("{src} at {:?} slot {alpha:?}", p.x);
                    }
                }
            }
        }
    }
    out
}
