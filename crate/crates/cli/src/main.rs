use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod run;

#[derive(Debug, Parser)]
#[command(name = "mp-lab", version, about = "Maximum-principle test bench for degenerate elliptic operators on cylinders")]
struct Cli {
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the scenario tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file (the `.toml` extension may be omitted).
    Run { path: PathBuf },
    /// Print the operator preset registry.
    ListPresets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match cli.command {
        Command::ListPresets => {
            print!("{}", run::list_presets());
            ExitCode::SUCCESS
        }
        Command::Run { path } => match run::run(&path, cli.tolerance, cli.out.as_deref()) {
            Ok(outcome) => {
                print!("{}", outcome.summary);
                ExitCode::from(outcome.code)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
