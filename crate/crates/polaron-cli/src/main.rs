//! `polaron`: verification suites and solvers for the small polaron chain with
//! Grassmann-valued boundaries.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a
//! computation breaks down, 2 for configuration and argument errors.

mod checks;
mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polaron::bethe::{solve_multistart, spectrum_match, TqMode};
use polaron::fusion::{at_root_of_unity, eta_n, q_recursion, truncation_residual};
use polaron::model::transfer;
use polaron::states::{vacuum_coefficients, vacuum_state};
use polaron::superlinalg::graded_eig;
use polaron::{g_component, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use checks::{Check, Suite, ED_MAX_N};
use config::{Common, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] polaron::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Model(polaron::Error::InvalidParams(_) | polaron::Error::InvalidArgument(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "polaron", version, about = "Small polaron chain with Grassmann-valued open boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run verification suites and report every check.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Diagonalize t(u) and match every eigenvalue with a Bethe solution.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the Bethe equations in one sector from random starts.
    Bethe {
        /// Number of Bethe roots per tier.
        #[arg(long)]
        m: usize,
        /// Random starts (default from the config).
        #[arg(long)]
        starts: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form reference state and its checks.
    Vacuum {
        #[command(flatten)]
        common: Common,
    },
    /// Fusion hierarchy at the truncation point of the given level.
    Fusion {
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// Also tabulate the Q^(n) recursion up to this depth.
        #[arg(long)]
        q_depth: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Summarize saved reports.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

/// Common envelope of every command's output.
#[derive(Debug, Serialize, Deserialize)]
struct Report {
    command: String,
    seed: u64,
    config: RunConfig,
    checks: Vec<Check>,
    passed: usize,
    failed: usize,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    data: Value,
}

impl Report {
    fn new(command: &str, cfg: &RunConfig, checks: Vec<Check>, data: Value) -> Self {
        let passed = checks.iter().filter(|c| c.pass).count();
        let failed = checks.len() - passed;
        Report { command: command.into(), seed: cfg.seed, config: cfg.clone(), checks, passed, failed, data }
    }
}

fn emit(report: &Report, out: Option<&PathBuf>) -> Result<ExitCode, CliError> {
    let text = serde_json::to_string_pretty(report).expect("reports serialize");
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(CliError::Io(e.to_string())),
                _ => {}
            }
        }
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        log::info!("{}/{}: {:e} vs {:e} ({:?})", c.suite, c.name, c.value, c.tolerance, c.bound);
    }
    eprintln!("{}: {} passed, {} failed", report.command, report.passed, report.failed);
    Ok(if report.failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_verify(suite: Suite, common: &Common) -> Result<ExitCode, CliError> {
    let cfg = common.resolve()?;
    let plan = checks::plan(suite, &cfg)?;
    let results: Vec<polaron::Result<Vec<Check>>> =
        pool(common.jobs)?.install(|| plan.par_iter().map(|(s, c)| checks::run(*s, c, &mut cfg.rng(*s as u64))).collect());
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    emit(&Report::new("verify", &cfg, all, Value::Null), common.output.as_ref())
}

fn guard_ed(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.params.n > ED_MAX_N {
        return Err(CliError::Config(format!(
            "N = {} is beyond exact diagonalization here (limit {ED_MAX_N}); the dense transfer matrix has 4^N Grassmann entries",
            cfg.params.n
        )));
    }
    Ok(())
}

fn cmd_spectrum(common: &Common) -> Result<ExitCode, CliError> {
    let cfg = common.resolve()?;
    guard_ed(&cfg)?;
    let rep = spectrum_match(&cfg.params, &checks::match_options(&cfg))?;
    let checks: Vec<Check> = rep
        .records
        .iter()
        .enumerate()
        .flat_map(|(i, r)| {
            let mut body = Check::below("spectrum", format!("eigenvalue {i} (M={}) body", r.m), r.residuals.body, cfg.tol(1e-8));
            let mut g = Check::below("spectrum", format!("eigenvalue {i} (M={}) G", r.m), r.residuals.g, cfg.tol(1e-7));
            body.pass &= r.matched;
            g.pass &= r.matched;
            [body, g]
        })
        .collect();
    let data = serde_json::to_value(&rep).expect("spectrum report serializes");
    emit(&Report::new("spectrum", &cfg, checks, data), common.output.as_ref())
}

fn cmd_bethe(m: usize, starts: Option<usize>, common: &Common) -> Result<ExitCode, CliError> {
    let cfg = common.resolve()?;
    let p = &cfg.params;
    if m > p.n {
        return Err(CliError::Config(format!("--m {m} exceeds N = {}", p.n)));
    }
    let sols = solve_multistart(p, m, starts.unwrap_or(cfg.starts), cfg.seed, cfg.u_ref, &cfg.newton)?;
    // Exact spectrum at u_ref, when affordable, to mark the physical solutions.
    let spectrum: Option<Vec<polaron::AlgebraElement>> = if p.n <= ED_MAX_N {
        Some(graded_eig(&transfer(cfg.u_ref, p)?, &cfg.eig)?.pairs.iter().map(|e| e.lambda()).collect())
    } else {
        None
    };
    let g = p.g();
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (i, s) in sols.iter().enumerate() {
        let lg = if p.amps.is_diagonal() { C64::new(0.0, 0.0) } else { g_component(&s.lambda, &g).0 };
        let in_spectrum = spectrum.as_ref().map(|sp| {
            let scale = s.lambda.max_abs().max(1.0);
            sp.iter().any(|l| (*l - s.lambda).max_abs() <= 1e-8 * scale)
        });
        checks.push(Check::below("bethe", format!("solution {i}: diagonal tier"), s.roots.residual_diag, cfg.tol(1e-10)));
        if !s.roots.v1.is_empty() {
            checks.push(Check::below("bethe", format!("solution {i}: second tier"), s.roots.residual_nondiag, cfg.tol(cfg.newton.tol)));
        }
        rows.push(json!({
            "lambda_body": s.lambda.body(),
            "lambda_G": lg,
            "M": m,
            "v0": s.roots.v0,
            "v1": s.roots.v1,
            "in_spectrum": in_spectrum,
        }));
    }
    let data = json!({ "u_ref": cfg.u_ref, "solutions": rows, "tq_mode": TqMode::Full });
    emit(&Report::new("bethe", &cfg, checks, data), common.output.as_ref())
}

fn cmd_vacuum(common: &Common) -> Result<ExitCode, CliError> {
    let cfg = common.resolve()?;
    let p = &cfg.params;
    let st = vacuum_state(p)?;
    let coef = vacuum_coefficients(p)?;
    let big_b: BTreeMap<String, C64> = coef.big_b.iter().map(|(&(k, l), &v)| (format!("{k},{l}"), v)).collect();
    let data = json!({
        "lambda_diag": st.lambda_diag,
        "lambda_nondiag": st.lambda_nondiag,
        "b_plus": coef.b_plus,
        "b_minus": coef.b_minus,
        "B": big_b,
        "state": st.to_json_map(),
    });
    emit(&Report::new("vacuum", &cfg, checks::vacuum_checks(&cfg)?, data), common.output.as_ref())
}

fn cmd_fusion(level: usize, q_depth: Option<usize>, common: &Common) -> Result<ExitCode, CliError> {
    if level == 0 {
        return Err(CliError::Config("--level must be at least 1; level 0 is the transfer matrix itself".into()));
    }
    let cfg = common.resolve()?;
    let p = at_root_of_unity(&cfg.params, level);
    let tr = cfg.u_grid.iter().map(|&u| truncation_residual(level, u, &p)).collect::<polaron::Result<Vec<f64>>>()?;
    let mut checks = vec![Check::below("fusion", format!("truncation n={level}"), tr.iter().cloned().fold(0.0, f64::max), cfg.tol(1e-9))];
    let mut data = json!({ "level": level, "eta_n": eta_n(level), "truncation": tr });
    if p.n <= ED_MAX_N {
        let v = checks::detrep_values(level, &p, cfg.u_ref, &cfg)?;
        checks.push(Check::below("fusion", "determinant on eigenvalues", v.iter().map(|x| x.0).fold(0.0, f64::max), cfg.tol(1e-8)));
        checks.push(Check::above(
            "fusion",
            "determinant on perturbed eigenvalues",
            v.iter().map(|x| x.1).fold(f64::INFINITY, f64::min),
            cfg.tol(1e-3),
        ));
        data["determinant"] = json!({ "exact": v.iter().map(|x| x.0).collect::<Vec<_>>(), "perturbed": v.iter().map(|x| x.1).collect::<Vec<_>>(), "perturbation": checks::DETREP_PERTURBATION });
    }
    if let Some(depth) = q_depth {
        // Diagnostic only: the recursion is tabulated at the configured η, on
        // the exact eigenvalues, and not judged.
        guard_ed(&cfg)?;
        let q = &cfg.params;
        let sys = graded_eig(&transfer(cfg.u_ref, q)?, &cfg.eig)?;
        let mut rows = Vec::new();
        for pair in &sys.pairs {
            let lam = |u| pair.eigenvalue_in(&transfer(u, q).expect("grid avoids poles")).body();
            let rec = q_recursion(depth, &cfg.u_grid, lam, q)?;
            rows.push(json!({ "lambda_body": pair.lambda().body(), "successive": rec.successive }));
        }
        data["q_recursion"] = json!(rows);
    }
    emit(&Report::new("fusion", &cfg, checks, data), common.output.as_ref())
}

fn cmd_report(files: &[PathBuf]) -> Result<ExitCode, CliError> {
    let mut failed = 0;
    for f in files {
        let text = std::fs::read_to_string(f).map_err(|e| CliError::Config(format!("{}: {e}", f.display())))?;
        let rep: Report = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: not a report: {e}", f.display())))?;
        println!(
            "{} [{}] N={} seed={}: {} passed, {} failed",
            f.display(),
            rep.command,
            rep.config.params.n,
            rep.seed,
            rep.passed,
            rep.failed
        );
        for c in rep.checks.iter().filter(|c| !c.pass) {
            println!("  FAIL {}/{}: {:.3e} (tolerance {:.1e}, {:?})", c.suite, c.name, c.value, c.tolerance, c.bound);
        }
        failed += rep.failed;
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POLARON_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify { suite, common } => cmd_verify(*suite, common),
        Command::Spectrum { common } => cmd_spectrum(common),
        Command::Bethe { m, starts, common } => cmd_bethe(*m, *starts, common),
        Command::Vacuum { common } => cmd_vacuum(common),
        Command::Fusion { level, q_depth, common } => cmd_fusion(*level, *q_depth, common),
        Command::Report { files } => cmd_report(files),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code())
    })
}
