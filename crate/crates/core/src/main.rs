use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use colbreak::cli;

/// Truncated collision-induced breakage: simulation and property checks.
#[derive(Parser)]
#[command(name = "colbreak", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write trajectory and moment CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the checks of a scenario or suite and write a report CSV.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare truncations l and 2l at t_end for each listed l.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        l: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate kernel and fragmentation model without integrating.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let code = match args.command {
        Command::Simulate { config, out } => cli::run_simulate(&config, &out),
        Command::Verify { config, out } => cli::run_verify(&config, &out),
        Command::Converge { config, l, out } => cli::run_converge(&config, &l, &out),
        Command::Validate { config } => cli::run_validate(&config),
    };
    ExitCode::from(code as u8)
}
