use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdm_harness::commands::{self, parse_tolerance};

#[derive(Parser)]
#[command(name = "pdmosc", version, about = "Position-dependent-mass oscillator simulations and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write the trajectory CSV and run summary.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override a scenario check tolerance.
        #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tolerance)]
        tol: Vec<(String, f64)>,
    },
    /// Run the registered verification suite.
    Verify {
        /// Restrict to checks concerning one orbit family.
        #[arg(long)]
        family: Option<String>,
        #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tolerance)]
        tol: Vec<(String, f64)>,
        /// Directory for report.json; the report goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, hide = true)]
        corrupt_omega: Option<f64>,
    },
    /// Map a scenario trajectory to the reference oscillator and fit it.
    Linearize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Measure frequencies and energies over a parameter grid.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Command::Simulate { scenario, out, tol } => commands::simulate(&scenario, &out, &tol),
        Command::Verify { family, tol, out, jobs, corrupt_omega } => {
            if jobs > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
            }
            commands::verify(family.as_deref(), &tol, out.as_deref(), corrupt_omega)
        }
        Command::Linearize { scenario, out } => commands::linearize(&scenario, &out),
        Command::Sweep { scenario, out, jobs } => commands::sweep(&scenario, &out, jobs),
    };
    ExitCode::from(code as u8)
}
