//! `quadsurf`: batch front end for the quadrature-surface laboratory.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quadsurf_core::Error;

#[derive(Parser)]
#[command(name = "quadsurf", version, about = "Quadrature-surface solver and claim checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the closed-form annulus solution on a grid.
    Oracle(OracleArgs),
    /// Run the free-boundary solver for a measure.
    Solve(SolveArgs),
    /// Run the claim suite on a scenario or a solver run directory.
    Verify(VerifyArgs),
    /// Run the claim suite over a grid of (ρ, R) and aggregate residuals.
    Sweep(SweepArgs),
}

#[derive(Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub rho: f64,
    #[arg(long = "R", alias = "outer")]
    pub outer: f64,
    /// Nodes per unit length (h = 1/grid).
    #[arg(long, default_value_t = 128)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SolveArgs {
    /// Measure description (JSON).
    #[arg(long)]
    pub measure: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub grid: usize,
    /// Radius of the initial disk, centred on the support hull.
    #[arg(long, default_value_t = 1.3)]
    pub init: f64,
    /// Free-boundary parameters (JSON); missing keys take defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// oracle-annulus, solver-ring or ellipse-control.
    #[arg(long, conflicts_with = "run", required_unless_present = "run")]
    pub scenario: Option<String>,
    /// Directory written by `solve`.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "64,128")]
    pub grids: Vec<usize>,
    /// Sampling configuration (JSON); missing keys take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "quadsurf-verify")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, default_value = "oracle-annulus")]
    pub scenario: String,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.25")]
    pub rho: Vec<f64>,
    #[arg(long = "R", alias = "outer", value_delimiter = ',', num_args = 1.., default_value = "1")]
    pub outer: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "64,128")]
    pub grids: Vec<usize>,
    /// Level (or ray distance) reported in the residual_at_level column.
    #[arg(long, default_value_t = 0.2)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// A command failure with its exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    NotConverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::NotConverged(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            Error::SolverFailure { .. } | Error::Collapse { .. } | Error::Divergence { .. } => Failure::NotConverged(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("QUADSURF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("QUADSURF_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Oracle(a) => commands::oracle(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Sweep(a) => commands::sweep(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("quadsurf: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
