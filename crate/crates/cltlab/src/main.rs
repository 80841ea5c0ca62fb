use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cltlab::plot::{plot_file, PlotKind};
use cltlab::{selftest, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "cltlab", version, about = "Monte Carlo checks of Edgeworth and ReLU-representation bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run { config: PathBuf },
    /// Render an SVG from a CSV written by `run`.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Output path; defaults to `<csv stem>.<kind>.svg`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the model catalog.
    ListModels,
    /// Run the closed-form identity checks.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cltlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode, CliError> {
    match cmd {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = cltlab::run(&cfg)?;
            println!("wrote {} ({} rows) and {}", out.csv.display(), out.rows, out.manifest.display());
        }
        Command::Plot { csv, kind, out } => {
            let path = plot_file(&csv, kind, out.as_deref())?;
            println!("wrote {}", path.display());
        }
        Command::ListModels => {
            for (name, about) in cltlab_core::dist_zoo::catalog() {
                println!("{name:<22} {about}");
            }
            println!("{:<22} Gaussian test function for ridge_reconstruct", "gauss:d=<1|2>");
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().any(|c| !c.pass) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
