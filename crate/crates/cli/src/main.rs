use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phdae_core::linalg::RANK_TOL;
use phdae_core::system::{DEFAULT_GRID, DEFAULT_TOL};

mod commands;

/// Verify, analyze, reduce and simulate linear port-Hamiltonian descriptor systems.
///
/// Exit codes: 0 success, 1 mathematical failure (structure, consistency or a
/// rank assumption), 2 input or usage error.
#[derive(Parser, Debug)]
#[command(name = "phdae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check skew-adjointness, Q^T E >= 0 and W >= 0 on a time grid.
    Verify {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        /// Report path; defaults to `<input>.verify.report.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derivative-array index analysis of the free response (u = 0).
    Analyze {
        path: PathBuf,
        #[arg(long, default_value_t = 3)]
        mu_max: usize,
        #[arg(long, default_value_t = RANK_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regularize if needed and reduce to an implicit port-Hamiltonian ODE.
    Reduce {
        path: PathBuf,
        /// Reduced system document; defaults to `<input>.reduced.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report path; defaults to `<input>.reduce.report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        mu_max: usize,
        #[arg(long, default_value_t = RANK_TOL)]
        tol: f64,
    },
    /// Integrate an index-one system and audit its energy balance.
    Simulate {
        path: PathBuf,
        /// Initial state as comma-separated values; overrides the document.
        #[arg(long)]
        x0: Option<String>,
        /// Polynomial input `c0;c1;...`, each coefficient comma-separated.
        #[arg(long)]
        u: Option<String>,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long, default_value = "implicit-midpoint")]
        method: String,
        /// Trajectory CSV (t, x.., y.., u.., H).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Project an inconsistent initial state instead of failing.
        #[arg(long)]
        project: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a preset through verify, analyze, reduce, simulate and audit.
    Demo {
        /// Preset: rlc, rlc-single, rlc-sourceless, gas, manipulator, acoustic,
        /// acoustic-singular or acoustic-lossless.
        name: String,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Directory for the system, reduced system, CSV and report.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write a preset as a system document.
    Export {
        /// Preset: rlc, rlc-single, rlc-sourceless, gas, manipulator, acoustic,
        /// acoustic-singular or acoustic-lossless.
        name: String,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify { path, tol, grid, out } => commands::verify(&path, tol, grid, out),
        Command::Analyze { path, mu_max, tol, out } => commands::analyze(&path, mu_max, tol, out),
        Command::Reduce {
            path,
            out,
            report,
            mu_max,
            tol,
        } => commands::reduce(&path, out, report, mu_max, tol),
        Command::Simulate {
            path,
            x0,
            u,
            h,
            method,
            csv,
            project,
            out,
        } => commands::simulate(&commands::SimulateArgs {
            path,
            x0,
            u,
            h,
            method,
            csv,
            project,
            out,
        }),
        Command::Demo { name, h, out_dir } => commands::demo(&name, h, out_dir),
        Command::Export { name, out } => commands::export(&name, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
