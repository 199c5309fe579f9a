use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use cqm_core::jet::EvalPoint;
use cqm_core::scenario::Scenario;
use cqm_core::special::extended_bracket;
use cqm_core::units::Dim;
use cqm_core::verify::{run_evolve, run_suites, Suite};
use cqm_core::CqmError;

#[derive(Parser)]
#[command(name = "cqm", version, about = "Special phase functions, Hermitian fields and Pauli evolution on curved Galileian backgrounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Run property suites and print a report.
    Verify {
        scenario: PathBuf,
        /// Suites to run (repeatable); all when omitted.
        #[arg(long = "suite", value_parser = parse_suite)]
        suites: Vec<Suite>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Evolve the initial spinor and write trajectory.csv and summary.json.
    Evolve {
        scenario: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the extended bracket of two named functions at a point.
    Bracket {
        scenario: PathBuf,
        f: String,
        g: String,
        #[arg(long, value_parser = parse_point)]
        at: EvalPoint,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: CqmError| e.to_string())
}

fn parse_point(s: &str) -> Result<EvalPoint, String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"))).collect::<Result<_, _>>()?;
    let x: [f64; 4] = v.try_into().map_err(|v: Vec<f64>| format!("expected 4 coordinates, got {}", v.len()))?;
    EvalPoint::new(x).map_err(|e| e.to_string())
}

enum Failure {
    Check(anyhow::Error),
    Usage(anyhow::Error),
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::from_path(path).with_context(|| format!("loading {}", path.display())).map_err(Failure::Usage)
}

fn numeric(e: CqmError) -> Failure {
    match e {
        CqmError::SolverDivergence(_) => Failure::Check(e.into()),
        other => Failure::Usage(other.into()),
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Verify { scenario, suites, samples, seed, format } => {
            let scn = load(&scenario)?;
            let suites = if suites.is_empty() { Suite::ALL.to_vec() } else { suites };
            let report = run_suites(&scn, &suites, samples, seed).map_err(numeric)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serialises")),
                Format::Table => print!("{}", report.table()),
            }
            Ok(report.pass)
        }
        Command::Evolve { scenario, steps, dt, out } => {
            let scn = load(&scenario)?;
            let spec = scn.file.evolve.clone();
            let steps = steps.or(spec.as_ref().map(|e| e.steps)).ok_or_else(|| Failure::Usage(anyhow!("--steps missing and scenario has no evolve block")))?;
            let dt = dt.or(spec.as_ref().map(|e| e.dt)).ok_or_else(|| Failure::Usage(anyhow!("--dt missing and scenario has no evolve block")))?;
            let (traj, summary) = run_evolve(&scn, steps, dt).map_err(numeric)?;
            write_outputs(&out, &traj.records, &summary).map_err(Failure::Usage)?;
            let pass = summary.norm_drift < 1e-12 && summary.frequency.as_ref().is_none_or(|f| f.relative_error < 1e-3);
            println!("{}", serde_json::to_string_pretty(&json!({ "summary": summary, "pass": pass })).expect("summary serialises"));
            Ok(pass)
        }
        Command::Bracket { scenario, f, g, at } => {
            let scn = load(&scenario)?;
            let (a, b) = (scn.function(&f).map_err(|e| Failure::Usage(e.into()))?, scn.function(&g).map_err(|e| Failure::Usage(e.into()))?);
            let v = extended_bracket(&a, &b, &scn.background, &at).map_err(numeric)?;
            let comp = |x: f64| json!({ "value": x, "dim": Dim::NONE });
            let out = json!({
                "f": f,
                "g": g,
                "at": at.x,
                "f0": comp(v.f0),
                "fi": v.fi.map(comp),
                "fbrev": comp(v.fbrev),
                "phi": v.phi.map(comp),
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("bracket serialises"));
            Ok(true)
        }
    }
}

fn write_outputs(dir: &Path, records: &[cqm_core::quantum::StepRecord], summary: &cqm_core::verify::EvolveSummary) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut csv = std::io::BufWriter::new(fs::File::create(dir.join("trajectory.csv"))?);
    writeln!(csv, "step,time,norm,sx,sy,sz,wx,wy,wz")?;
    for r in records {
        writeln!(csv, "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}", r.step, r.time, r.norm, r.s[0], r.s[1], r.s[2], r.w[0], r.w[1], r.w[2])?;
    }
    csv.flush()?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    Ok(())
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("CQM_THREADS") {
        let n: usize = v.parse().with_context(|| format!("CQM_THREADS='{v}'"))?;
        if n == 0 {
            bail!("CQM_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
