//! `mgsg`: batch commands over metric-graph problem files, emitting
//! machine-readable reports. Exit codes: 0 all checks ok, 1 a check failed,
//! 2 error.

mod commands;
mod report;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mgsg", version, about = "Laplace operators on metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format for record-style payloads.
    #[arg(long, global = true, default_value = "json")]
    format: Format,
    /// Seed for witness searches and random sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a problem file.
    Validate { file: PathBuf },
    /// Classify the boundary conditions (accretive, dissipative, self-adjoint).
    Classify { file: PathBuf },
    /// Evaluate the scattering matrix S(k).
    Smatrix {
        file: PathBuf,
        /// Evaluate at k = i kappa.
        #[arg(long)]
        kappa: Option<f64>,
        /// Evaluate at a general complex k, as `re,im`.
        #[arg(long)]
        k: Option<String>,
    },
    /// Evaluate Green's-function entries.
    Green {
        file: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        /// Evaluation point `edge:pos`.
        #[arg(long)]
        x: String,
        /// Source point `edge:pos`.
        #[arg(long)]
        y: String,
    },
    /// Scan for negative eigenvalues -kappa^2.
    Eigs {
        file: PathBuf,
        /// Scan range `lo,hi` for kappa.
        #[arg(long, default_value = "0,50")]
        range: String,
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
    /// Feller criteria, positivity classes and the sup-norm bound.
    Feller {
        file: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        kappa: f64,
    },
    /// Evolve an initial profile by e^{t Delta}.
    Evolve {
        file: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        t: f64,
        /// Initial profile: bump | constant | sine.
        #[arg(long, default_value = "bump")]
        psi0: String,
    },
    /// Enumerate walks and their weights.
    Walks {
        file: PathBuf,
        /// Source endpoint `edge[:-|:+]`.
        #[arg(long)]
        from: String,
        /// Target endpoint `edge[:-|:+]`.
        #[arg(long)]
        to: String,
        /// Metric-length cutoff.
        #[arg(long, default_value_t = 4.0)]
        cutoff: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
    },
    /// Run the verification battery on a problem file.
    Verify { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let tol_scale = match std::env::var("MGSG_TOL_OVERRIDE") {
        Ok(v) => v.parse::<f64>().unwrap_or(1.0),
        Err(_) => 1.0,
    };
    let ctx = commands::Context {
        format: cli.format,
        seed: cli.seed,
        tol_scale,
    };
    let outcome = match &cli.command {
        Command::Validate { file } => commands::validate(file, &ctx),
        Command::Classify { file } => commands::classify(file, &ctx),
        Command::Smatrix { file, kappa, k } => commands::smatrix(file, *kappa, k.as_deref(), &ctx),
        Command::Green { file, kappa, x, y } => commands::green(file, *kappa, x, y, &ctx),
        Command::Eigs { file, range, grid } => commands::eigs(file, range, *grid, &ctx),
        Command::Feller { file, kappa } => commands::feller(file, *kappa, &ctx),
        Command::Evolve { file, t, psi0 } => commands::evolve(file, *t, psi0, &ctx),
        Command::Walks {
            file,
            from,
            to,
            cutoff,
            kappa,
        } => commands::walks(file, from, to, *cutoff, *kappa, &ctx),
        Command::Verify { file } => commands::verify(file, &ctx),
    };
    match outcome {
        Ok(report) => {
            let failed = report.any_failed();
            report.emit(cli.format);
            if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            let diag = report::diagnostic(&err);
            println!("{}", serde_json::to_string_pretty(&diag).unwrap());
            ExitCode::from(2)
        }
    }
}
