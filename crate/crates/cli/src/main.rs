//! `batchopt` command-line tool.
//!
//! ```text
//! batchopt --mode bench --n 8 --batch 1000 --workers 4 --out results/
//! batchopt --mode admm --case case9.m --workers 2 --out results/
//! ```
//!
//! Exit code 0 means success, 1 means the solver did not converge (outputs
//! are still written), 2 means bad arguments or an unreadable case file.

mod bench;
mod run_admm;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Batch of identical hs45 problems.
    Bench,
    /// ADMM on a MATPOWER case.
    Admm,
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "batchopt",
    version,
    about = "Batch trust-region solves and ACOPF by ADMM"
)]
pub struct RunConfig {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// MATPOWER case file (admm mode).
    #[arg(long = "case")]
    pub case_path: Option<PathBuf>,
    /// hs45 dimension (bench mode).
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Number of hs45 instances (bench mode).
    #[arg(long = "batch", default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 10.0)]
    pub rho0: f64,
    /// Outer iterations: TRON in bench mode (default 200), ADMM in admm mode
    /// (default 5000).
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    pub tol_primal: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol_dual: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_pg: f64,
    /// Output directory, created if missing.
    #[arg(long = "out", default_value = ".")]
    pub output_dir: PathBuf,
    /// Recorded in the summary; the hs45 batch itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Outcome of a run, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    NotConverged,
    Io(anyhow::Error),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.into())
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), Failure> {
        let usage = |m: &str| Err(Failure::Usage(m.to_string()));
        if self.workers == 0 {
            return usage("--workers must be positive");
        }
        if self.max_iter == Some(0) {
            return usage("--max-iter must be positive");
        }
        for (name, v) in [
            ("--rho0", self.rho0),
            ("--tol-primal", self.tol_primal),
            ("--tol-dual", self.tol_dual),
            ("--tol-pg", self.tol_pg),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::Usage(format!("{name} must be a positive number")));
            }
        }
        match self.mode {
            Mode::Bench if !(1..=batchopt::tron::DEFAULT_CAPACITY).contains(&self.n) => {
                Err(Failure::Usage(format!(
                    "--n must lie in 1..={}, got {}",
                    batchopt::tron::DEFAULT_CAPACITY,
                    self.n
                )))
            }
            Mode::Admm if self.case_path.is_none() => usage("--case is required in admm mode"),
            _ => Ok(()),
        }
    }

    fn tron(&self) -> batchopt::TronConfig {
        batchopt::TronConfig {
            tol_pg: self.tol_pg,
            ..batchopt::TronConfig::default()
        }
    }
}

fn run(cfg: &RunConfig) -> Result<(), Failure> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    match cfg.mode {
        Mode::Bench => bench::run_bench(cfg),
        Mode::Admm => run_admm::run_admm(cfg),
    }
}

fn main() -> ExitCode {
    let cfg = match RunConfig::try_parse() {
        Ok(cfg) => cfg,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
