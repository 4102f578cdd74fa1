//! Command-line driver: builds kernels, solves for measures, runs theorem
//! checks and Monte Carlo estimates, and writes reports.
//!
//! Exit codes: 0 success, 1 a check failed, 2 configuration or argument
//! error, 3 invalid kernel, 4 solver did not converge, 5 violated
//! precondition (for example a non-stationary measure).

mod commands;
mod config;
mod failure;
mod kernel_file;
mod report;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::RunConfig;
use failure::Failure;
use report::Meta;

#[derive(Parser)]
#[command(name = "noisy-ergodic", version, about = "Transfer operators and ergodic theorems for noisy maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Kernel file, in place of a `[system]` section
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance for theorem checks
    #[arg(long)]
    tol: Option<f64>,
    /// Truncation of the supremum over n
    #[arg(long = "n-max")]
    n_max: Option<usize>,
    /// Random observables per check
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated check names
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    /// Comma-separated weights of a measure to analyse
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    mu: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Discretize a noisy system into a kernel file
    KernelBuild(Common),
    /// Stationary, periodic and ergodic measures of a kernel
    Measure(Common),
    /// Run theorem checks; exits 1 if any fails
    Verify {
        /// Checks to run (default: all)
        names: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Sample trajectories and estimate L^j phi
    Simulate(Common),
}

fn resolve(common: &Common, names: &[String]) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(k) = &common.kernel {
        if cfg.system.is_some() {
            return Err(Failure::Config("`--kernel` conflicts with the `[system]` section".into()));
        }
        cfg.kernel = Some(k.clone());
        cfg.base_dir = PathBuf::new();
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.mc.master_seed = seed;
    }
    if let Some(tol) = common.tol {
        cfg.checks.tol = tol;
    }
    if let Some(n) = common.n_max {
        cfg.checks.n_max = n;
    }
    if let Some(t) = common.trials {
        cfg.checks.trials = t;
    }
    let mut checks: Vec<String> = names.to_vec();
    checks.extend(common.checks.iter().flatten().cloned());
    if !checks.is_empty() {
        cfg.checks.names = checks;
    }
    if let Some(mu) = &common.mu {
        cfg.measure.mu = Some(mu.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Outcome {
    result: Result<Value, Failure>,
    partial: Option<Value>,
    summary: String,
}

fn run_kernel_build(cfg: &RunConfig, meta: &mut Meta) -> Outcome {
    let built = match commands::kernel_build(cfg) {
        Ok(b) => b,
        Err(e) => return Outcome { result: Err(e), partial: None, summary: String::new() },
    };
    meta.kernel_sha256 = Some(report::sha256_hex(built.text.as_bytes()));
    let s = &built.summary;
    let summary = format!(
        "kernel-build: K={} nnz={} max_row_sum_deviation={:e} -> {}",
        s["K"],
        s["nnz"],
        s["max_row_sum_deviation"].as_f64().unwrap_or(f64::NAN),
        cfg.output.dir.join("kernel.txt").display()
    );
    let result = report::write(&cfg.output.dir, "kernel.txt", &built.text).map(|_| built.summary);
    Outcome { result, partial: None, summary }
}

fn with_kernel(
    cfg: &RunConfig,
    meta: &mut Meta,
    body: impl FnOnce(&noisy_ergodic::Kernel) -> Outcome,
) -> Outcome {
    match commands::load_kernel(cfg) {
        Ok(loaded) => {
            meta.kernel_sha256 = loaded.sha256;
            body(&loaded.kernel)
        }
        Err(e) => Outcome { result: Err(e), partial: None, summary: String::new() },
    }
}

fn run_measure(cfg: &RunConfig, p: &noisy_ergodic::Kernel) -> Outcome {
    let result = commands::measure(cfg, p);
    let summary = match &result {
        Ok(v) => format!(
            "measure: K={} stationary={} ergodic components",
            v["K"],
            v["stationary"].as_array().map_or(0, Vec::len)
        ),
        Err(_) => String::new(),
    };
    Outcome { result, partial: None, summary }
}

fn run_verify(cfg: &RunConfig, p: &noisy_ergodic::Kernel) -> Outcome {
    let mut done: Vec<verify::CheckSummary> = Vec::new();
    let checks = cfg.resolved_checks().expect("validated");
    let outcome = verify::Verifier::new(cfg, p).and_then(|v| {
        for check in &checks {
            done.push(v.run(check)?);
        }
        Ok(())
    });
    let failed = done.iter().filter(|s| !s.passed).count();
    let value = json!({ "K": p.size(), "checks": done });
    let summary = format!("verify: {} of {} checks passed", done.len() - failed, checks.len());
    match outcome {
        Err(e) => Outcome { result: Err(e), partial: Some(value), summary },
        Ok(()) if failed > 0 => Outcome { result: Err(Failure::ChecksFailed { failed }), partial: Some(value), summary },
        Ok(()) => Outcome { result: Ok(value), partial: None, summary },
    }
}

fn run_simulate(cfg: &RunConfig, p: &noisy_ergodic::Kernel) -> Outcome {
    let sim = match commands::simulate(cfg, p) {
        Ok(s) => s,
        Err(e) => return Outcome { result: Err(e), partial: None, summary: String::new() },
    };
    let mut result = Ok(sim.summary);
    if cfg.output.wants("csv") {
        let written = report::write(&cfg.output.dir, "trajectories.csv", &sim.trajectories_csv)
            .and_then(|_| report::write(&cfg.output.dir, "estimates.csv", &sim.estimates_csv));
        if let Err(e) = written {
            result = Err(e);
        }
    }
    let summary = format!(
        "simulate: {} trajectories of {} steps, {} estimates",
        cfg.mc.trajectories,
        cfg.mc.steps,
        cfg.mc.j.len()
    );
    Outcome { result, partial: None, summary }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common, names): (&'static str, Common, Vec<String>) = match cli.command {
        Command::KernelBuild(c) => ("kernel-build", c, Vec::new()),
        Command::Measure(c) => ("measure", c, Vec::new()),
        Command::Verify { names, common } => ("verify", common, names),
        Command::Simulate(c) => ("simulate", c, Vec::new()),
    };
    let cfg = match resolve(&common, &names) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let mut meta = Meta::new(name, &cfg);
    let outcome = match name {
        "kernel-build" => run_kernel_build(&cfg, &mut meta),
        "measure" => with_kernel(&cfg, &mut meta, |p| run_measure(&cfg, p)),
        "verify" => with_kernel(&cfg, &mut meta, |p| run_verify(&cfg, p)),
        _ => with_kernel(&cfg, &mut meta, |p| run_simulate(&cfg, p)),
    };
    let mut code = match &outcome.result {
        Ok(_) => 0,
        Err(e) => e.exit_code(),
    };
    if cfg.output.wants("json") {
        let text = report::render(&meta, &outcome.result, outcome.partial);
        if let Err(e) = report::write(&cfg.output.dir, &format!("{name}.json"), &text) {
            eprintln!("error: {e}");
            if code == 0 {
                code = e.exit_code();
            }
        }
    }
    match &outcome.result {
        Ok(_) => println!("{}", outcome.summary),
        Err(e) => {
            if !outcome.summary.is_empty() {
                println!("{}", outcome.summary);
            }
            eprintln!("error: {e}");
        }
    }
    ExitCode::from(code)
}
