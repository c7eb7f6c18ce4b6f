//! `otmap`: command-line front end for the solvers, experiments and
//! verification suites.
//!
//! Exit codes: 0 success, 1 argument or I/O error, 2 solver
//! non-convergence, 3 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use otmap::experiments::{self, EpsRule, ExperimentKind, ExperimentSpec};
use otmap::measures::{fmt_f64, DiscreteMeasure};
use otmap::serialize::to_json_string;
use otmap::sinkhorn::{self, SinkhornOptions};
use otmap::verify::{self, Tolerances};

const THREADS_ENV: &str = "OTMAP_THREADS";

const EXIT_ARGS: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "otmap", version, about = "Optimal transport map estimators onto discrete targets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve entropic OT between two measure CSV files.
    Sinkhorn(SinkhornArgs),
    /// Run a seeded convergence-rate experiment.
    Experiment(ExperimentArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SinkhornArgs {
    /// Source measure, CSV with header `w,x1,...,xd`.
    #[arg(long)]
    source: PathBuf,
    /// Target measure, same format.
    #[arg(long)]
    target: PathBuf,
    /// Entropic regularisation strength.
    #[arg(long)]
    eps: f64,
    /// Stopping tolerance on the L1 marginal error.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write the per-iteration residual to `trace.csv`.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Default)]
struct ExperimentArgs {
    /// slab, random-laguerre, sign-split or lecam.
    #[arg(long)]
    kind: Option<String>,
    /// Ambient dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Number of target atoms.
    #[arg(long = "J")]
    j: Option<usize>,
    /// Comma-separated, strictly increasing sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Independent trials per sample size.
    #[arg(long)]
    trials: Option<usize>,
    /// Monte Carlo points per MSE estimate.
    #[arg(long)]
    mc_points: Option<usize>,
    /// Constant c in ε = c·n^{-1/2} (scaled) or ε = c (fixed).
    #[arg(long)]
    eps_const: Option<f64>,
    /// scaled or fixed.
    #[arg(long)]
    eps_rule: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for raw.csv, aggregate.csv, report.json and plot data.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Le Cam perturbation size.
    #[arg(long)]
    r: Option<f64>,
    /// Sinkhorn stopping tolerance on the L1 marginal error.
    #[arg(long)]
    sinkhorn_tol: Option<f64>,
    #[arg(long)]
    sinkhorn_max_iter: Option<usize>,
    /// Flat JSON file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Config-file mirror of [`ExperimentArgs`].
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct ExperimentConfig {
    kind: Option<String>,
    d: Option<usize>,
    #[serde(rename = "J")]
    j: Option<usize>,
    n_grid: Option<Vec<usize>>,
    trials: Option<usize>,
    mc_points: Option<usize>,
    eps_const: Option<f64>,
    eps_rule: Option<String>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    r: Option<f64>,
    sinkhorn_tol: Option<f64>,
    sinkhorn_max_iter: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run a single suite.
    #[arg(long)]
    suite: Option<String>,
    /// Flat JSON object overriding named tolerances.
    #[arg(long)]
    tolerances: Option<PathBuf>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<otmap::Error>() {
            Some(otmap::Error::NotConverged { .. } | otmap::Error::SemiDualNotConverged { .. }) => EXIT_NOT_CONVERGED,
            _ => EXIT_ARGS,
        };
        Self { code, error }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ARGS } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_ARGS);
    }
    let outcome = match cli.command {
        Command::Sinkhorn(a) => cmd_sinkhorn(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("{THREADS_ENV} must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn read_measure(path: &Path) -> anyhow::Result<DiscreteMeasure> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    DiscreteMeasure::read_csv(file).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_sinkhorn(a: SinkhornArgs) -> Result<u8, Failure> {
    if !(a.eps > 0.0 && a.eps.is_finite()) {
        return Err(anyhow!("--eps must be positive").into());
    }
    if !(a.tol > 0.0) || a.max_iter == 0 {
        return Err(anyhow!("--tol and --max-iter must be positive").into());
    }
    let mu = read_measure(&a.source)?;
    let nu = read_measure(&a.target)?;
    let opts = SinkhornOptions { tol: a.tol, max_iter: a.max_iter, record_trace: a.trace };
    let (pot, report) = sinkhorn::solve(&mu, &nu, a.eps, &opts).map_err(anyhow::Error::from)?;

    fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    write_file(&a.out_dir.join("potentials.json"), to_json_string(&pot).map_err(anyhow::Error::from)?)?;
    let mut summary = report.clone();
    summary.trace = None;
    write_file(&a.out_dir.join("report.json"), to_json_string(&summary).map_err(anyhow::Error::from)?)?;
    if a.trace {
        let mut buf = Vec::new();
        report.write_trace_csv(&mut buf).map_err(anyhow::Error::from)?;
        write_file(&a.out_dir.join("trace.csv"), buf)?;
    }

    println!("cost {}", fmt_f64(report.cost));
    println!("iterations {} residual {}", report.iterations, fmt_f64(report.residual));
    if report.converged {
        Ok(0)
    } else {
        eprintln!("error: sinkhorn did not reach tol {} within {} iterations", a.tol, a.max_iter);
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn merge_spec(a: ExperimentArgs) -> anyhow::Result<(ExperimentSpec, PathBuf)> {
    let cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    let mut spec = ExperimentSpec::default();
    let kind = a.kind.or(cfg.kind).ok_or_else(|| anyhow!("--kind is required"))?;
    spec.kind = kind.parse::<ExperimentKind>()?;
    let out_dir = a.out_dir.or(cfg.out_dir).ok_or_else(|| anyhow!("--out-dir is required"))?;
    if let Some(v) = a.d.or(cfg.d) {
        spec.d = v;
    }
    if let Some(v) = a.j.or(cfg.j) {
        spec.j = v;
    }
    if let Some(v) = a.n_grid.or(cfg.n_grid) {
        spec.n_grid = v;
    }
    if let Some(v) = a.trials.or(cfg.trials) {
        spec.trials = v;
    }
    if let Some(v) = a.mc_points.or(cfg.mc_points) {
        spec.mc_points = v;
    }
    if let Some(v) = a.seed.or(cfg.seed) {
        spec.seed = v;
    }
    if let Some(v) = a.r.or(cfg.r) {
        spec.r = v;
    }
    if let Some(v) = a.sinkhorn_tol.or(cfg.sinkhorn_tol) {
        spec.sinkhorn_tol = v;
    }
    if let Some(v) = a.sinkhorn_max_iter.or(cfg.sinkhorn_max_iter) {
        spec.sinkhorn_max_iter = v;
    }
    let c = a.eps_const.or(cfg.eps_const).unwrap_or(spec.eps_rule.constant());
    spec.eps_rule = match a.eps_rule.or(cfg.eps_rule).as_deref().unwrap_or("scaled") {
        "scaled" => EpsRule::Scaled(c),
        "fixed" => EpsRule::Fixed(c),
        other => bail!("unknown eps rule `{other}`; expected scaled or fixed"),
    };
    spec.validate()?;
    Ok((spec, out_dir))
}

fn cmd_experiment(a: ExperimentArgs) -> Result<u8, Failure> {
    let (spec, out_dir) = merge_spec(a)?;
    let report = experiments::run(&spec).map_err(anyhow::Error::from)?;
    report.write_all(&out_dir).map_err(anyhow::Error::from)?;

    for e in &report.estimators {
        match e.fit {
            Some(f) => println!("{:<17} slope {:+.4}", e.estimator, f.slope),
            None => println!("{:<17} slope n/a", e.estimator),
        }
        for row in &e.rows {
            println!("  n={:<6} mse {} std {}", row.n, fmt_f64(row.mse_mean), fmt_f64(row.mse_std));
        }
    }
    if let Some(m) = report.map_distance {
        println!("lecam map distance mse {} se {} (r = {})", fmt_f64(m.mean), fmt_f64(m.std_error), spec.r);
    }
    if report.failures.is_empty() {
        Ok(0)
    } else {
        for f in &report.failures {
            eprintln!("cell n={} trial={} failed: {}", f.n, f.trial, f.message);
        }
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<u8, Failure> {
    let mut tol = Tolerances::default();
    if let Some(p) = &a.tolerances {
        let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        tol = tol.with_json_overrides(&text).with_context(|| format!("invalid tolerances {}", p.display()))?;
    }
    let results = verify::run(a.suite.as_deref(), &tol).map_err(anyhow::Error::from)?;
    let mut failed = 0;
    for c in &results {
        println!("{} [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    println!("{} checks, {} failed", results.len(), failed);
    Ok(if failed == 0 { 0 } else { EXIT_VERIFY })
}
