mod config;
mod digits;
mod manifest;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::UsageError;

#[derive(Parser)]
#[command(name = "mchl", version, about = "Markov chain Hebbian learning experiments")]
struct Cli {
    /// JSON file with default values for the subcommand's options.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a digit classifier on IDX files.
    TrainMnist(digits::TrainArgs),
    /// Evaluate saved layer checkpoints on the test split.
    EvalMnist(digits::EvalArgs),
    /// Memorize the M x M multiplication table.
    Memorize(table::MemorizeArgs),
    /// Look up a product.
    Product(table::ProductArgs),
    /// List the divisors stored for a product.
    Aliquot(table::AliquotArgs),
    /// Factorize an integer by iterated table lookups.
    Factorize(table::FactorizeArgs),
    /// Compare table factorization with direct search on random integers.
    BenchFactorize(table::BenchArgs),
    /// Print the header of a matrix file.
    Info(table::InfoArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::TrainMnist(a) => digits::train(config::merge(a, &cfg)?),
        Command::EvalMnist(a) => digits::eval(config::merge(a, &cfg)?),
        Command::Memorize(a) => table::memorize(config::merge(a, &cfg)?),
        Command::Product(a) => table::product(config::merge(a, &cfg)?),
        Command::Aliquot(a) => table::aliquot(config::merge(a, &cfg)?),
        Command::Factorize(a) => table::factorize(config::merge(a, &cfg)?),
        Command::BenchFactorize(a) => table::bench(config::merge(a, &cfg)?),
        Command::Info(a) => table::info(config::merge(a, &cfg)?),
    }
}

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DOMAIN: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<mchl_core::Error>() {
            use mchl_core::Error::*;
            return match e {
                Io(_) | Format(_) | Idx(_) | Json(_) => EXIT_IO,
                _ => EXIT_DOMAIN,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_DOMAIN
}

/// A closed stdout (`mchl ... | head`) is not a failure.
fn broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
