use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fejer_core::geometry::DEFAULT_ETA;
use fejer_core::moduli::estimate_modulus_from_oracles;
use fejer_core::problems::{catalog, catalog_instances, ProblemConfig, ProblemInstance};
use fejer_core::verify::{run_full_audit, AuditParams, Fault, DEFAULT_EPS_GRID, DEFAULT_SAMPLES};
use fejer_core::Error;
use serde::Serialize;

/// Certified Fejér-monotone iterations: run, certify, audit and estimate.
#[derive(Parser, Debug)]
#[command(name = "fejer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the instance's iteration and write its trace.
    Run(RunArgs),
    /// Tabulate certified indices for each ε.
    Certify(CertifyArgs),
    /// Audit moduli, rates and inequalities; exits 1 on any failure.
    Verify(VerifyArgs),
    /// Empirical modulus table δ̂(ε) from the instance oracles.
    EstimateModulus(EstimateArgs),
    /// Write the built-in problem files into a directory.
    Catalog(CatalogArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Output {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Problem files to audit; the built-in catalog when absent.
    #[arg(long)]
    problem: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    #[arg(long)]
    inject_fault: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct CatalogArgs {
    #[arg(long, default_value = "problems")]
    out: PathBuf,
}

enum Failure {
    Audit,
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Verify(a) => cmd_verify(a),
        Command::EstimateModulus(a) => cmd_estimate(a),
        Command::Catalog(a) => cmd_catalog(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Audit) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> Result<ProblemInstance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let cfg = ProblemConfig::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(cfg.build()?)
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_rows<T: Serialize>(rows: &[T], output: &Output) -> Result<(), Failure> {
    let mut w = sink(&output.out)?;
    match output.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(Error::from)?;
            writeln!(w)?;
        }
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            for r in rows {
                csv.serialize(r)?;
            }
            csv.flush()?;
        }
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let inst = load(&a.problem)?;
    let trace = inst.run(a.steps.unwrap_or(inst.steps))?;
    let mut w = sink(&a.output.out)?;
    match a.output.format {
        Format::Csv => trace.write_csv(&mut w)?,
        Format::Json => writeln!(w, "{}", trace.to_json())?,
    }
    w.flush()?;
    let last = trace.last().expect("traces hold x0");
    eprintln!(
        "{}: n={} residual={} dist={}",
        inst.name,
        last.n,
        last.residual.map_or("-".into(), |r| r.to_string()),
        last.dist.map_or("-".into(), |d| d.to_string()),
    );
    Ok(())
}

#[derive(Serialize)]
struct CertificateRow {
    eps: f64,
    alpha: u64,
    dist: u64,
    cauchy: u64,
    termination: Option<u64>,
}

fn cmd_certify(a: CertifyArgs) -> Result<(), Failure> {
    let inst = load(&a.problem)?;
    let termination = match inst.certificate.eps_star {
        Some(_) => Some(inst.termination_index()?),
        None => None,
    };
    let grid = a.eps.unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec());
    let rows = grid
        .iter()
        .map(|&eps| {
            check_eps(eps)?;
            let c = inst.certified_indices(eps)?;
            Ok(CertificateRow {
                eps,
                alpha: c.alpha,
                dist: c.dist,
                cauchy: c.cauchy,
                termination,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    write_rows(&rows, &a.output)
}

fn check_eps(eps: f64) -> Result<(), Failure> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Failure::Input(format!("eps {eps} must be positive")))
    }
}

#[derive(Serialize)]
struct ReportRow<'a> {
    check: &'a str,
    instance: &'a str,
    passed: bool,
    worst_violation: Option<f64>,
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let fault = a.inject_fault.as_deref().map(str::parse::<Fault>).transpose()?;
    if a.eta.is_nan() || a.eta < 0.0 {
        return Err(Failure::Input(format!("eta {} must be >= 0", a.eta)));
    }
    let eps_grid = a.eps.unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec());
    for &e in &eps_grid {
        check_eps(e)?;
    }
    let params = AuditParams {
        eps_grid,
        samples: a.samples,
        seed: a.seed,
        eta: a.eta,
    };
    let instances = if a.problem.is_empty() {
        catalog_instances()?
    } else {
        a.problem.iter().map(|p| load(p)).collect::<Result<_, _>>()?
    };
    let reports = run_full_audit(&instances, &params, fault);
    for r in &reports {
        eprintln!("{r}");
    }
    let mut w = sink(&a.out)?;
    match a.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &reports).map_err(Error::from)?;
            writeln!(w)?;
            w.flush()?;
        }
        Format::Csv => {
            let rows: Vec<ReportRow> = reports
                .iter()
                .map(|r| ReportRow {
                    check: &r.check,
                    instance: r.instance.as_deref().unwrap_or(""),
                    passed: r.passed,
                    worst_violation: r.worst_violation,
                })
                .collect();
            let mut csv = csv::Writer::from_writer(w);
            for r in rows {
                csv.serialize(r)?;
            }
            csv.flush()?;
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    eprintln!("{} checks, {failed} failed", reports.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Audit)
    }
}

#[derive(Serialize)]
struct EstimateRow {
    eps: f64,
    delta: f64,
}

fn cmd_estimate(a: EstimateArgs) -> Result<(), Failure> {
    let inst = load(&a.problem)?;
    let grid = a.eps.unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec());
    let (residual, zero_distance) = (inst.residual_fn(), inst.zero_distance_fn());
    let table = estimate_modulus_from_oracles(&*residual, &*zero_distance, &inst.ball(), &grid, a.samples, a.seed)?;
    let rows: Vec<EstimateRow> = table
        .into_iter()
        .map(|(eps, delta)| EstimateRow { eps, delta })
        .collect();
    write_rows(&rows, &a.output)
}

fn cmd_catalog(a: CatalogArgs) -> Result<(), Failure> {
    fs::create_dir_all(&a.out)?;
    for cfg in catalog() {
        let path = a.out.join(format!("{}.json", cfg.name));
        fs::write(&path, cfg.to_json() + "\n")?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
