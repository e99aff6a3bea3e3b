use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod analyze;
mod oracle;
mod simulate;

#[derive(Parser)]
#[command(name = "lcpos", version, about = "Longest-chain proof-of-stake simulator and analysis toolkit")]
struct Cli {
    /// Output style for printed results.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a TOML config and write its run log.
    Simulate(simulate::Args),
    /// Evaluate one closed-form quantity.
    Analyze {
        #[command(subcommand)]
        what: analyze::Query,
        /// Also write the result as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the minimal safe window over a range of adversarial stake.
    Sweep(analyze::SweepArgs),
    /// Cross-check closed forms against exhaustive enumeration, Monte Carlo and the engine.
    OracleCheck(oracle::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => simulate::run(a, cli.format),
        Command::Analyze { what, out } => analyze::run(what, out, cli.format),
        Command::Sweep(a) => analyze::sweep(a, cli.format),
        Command::OracleCheck(a) => oracle::run(a, cli.format),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
