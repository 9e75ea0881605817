//! The `spdkit` command-line tool: dataset generation and splitting,
//! training, evaluation, encoding, parameter sweeps, timing benchmarks and
//! ablations. Sweep and series outputs are CSV, single summaries are JSON.

pub mod commands;
mod output;

use anyhow::Result;
use clap::{Parser, Subcommand};

pub use output::Provenance;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SPDKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "spdkit", version, about = "Divergence dictionary learning on SPD matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic Wishart dataset
    #[command(alias = "generate")]
    Synth(commands::synth::Args),
    /// Stratified train/test split of a dataset file
    Split(commands::split::Args),
    /// Fit a model by block-coordinate descent
    Train(commands::train::Args),
    /// Evaluate a model and/or a 1-NN baseline on a test set
    Eval(commands::eval::Args),
    /// Write the encodings of a dataset under a model
    Encode(commands::encode::Args),
    /// Sweep divergence parameters over a grid with a fixed dictionary
    Grid(commands::grid::Args),
    /// Time gradient and objective evaluations
    Bench(commands::bench::Args),
    /// Compare fixed-parameter, fixed-dictionary and joint learning
    Ablate(commands::ablate::Args),
}

/// Parses `args` (program name first) and runs the command.
pub fn run(args: &[String]) -> Result<()> {
    let cli = Cli::try_parse_from(args).map_err(|e| {
        if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
            let _ = e.print();
            std::process::exit(0);
        }
        anyhow::Error::new(UsageError(e.to_string()))
    })?;
    let prov = Provenance::new(args);
    match cli.command {
        Command::Synth(a) => commands::synth::run(&a, &prov),
        Command::Split(a) => commands::split::run(&a, &prov),
        Command::Train(a) => commands::train::run(&a, &prov),
        Command::Eval(a) => commands::eval::run(&a, &prov),
        Command::Encode(a) => commands::encode::run(&a, &prov),
        Command::Grid(a) => commands::grid::run(&a, &prov),
        Command::Bench(a) => commands::bench::run(&a, &prov),
        Command::Ablate(a) => commands::ablate::run(&a, &prov),
    }
}

/// Bad command-line usage.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0.trim_start_matches("error: ").trim_end())
    }
}

impl std::error::Error for UsageError {}

/// 2 for bad inputs (files, flags, datasets), 3 for numerical failures.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<spdkit::Error>() {
            return if err.is_input_error() { EXIT_INPUT } else { EXIT_NUMERICAL };
        }
    }
    EXIT_INPUT
}

/// Sizes the global worker pool from `SPDKIT_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        anyhow::ensure!(n >= 1, "{THREADS_ENV} must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let input = anyhow::Error::new(spdkit::Error::CorruptFile("x".into()));
        assert_eq!(exit_code(&input), EXIT_INPUT);
        let numeric = anyhow::Error::new(spdkit::Error::FitAborted {
            block: "dictionary",
            atom: Some(3),
            history: Vec::new(),
            source: Box::new(spdkit::Error::NumericalBreakdown { context: "eig".into() }),
        });
        assert_eq!(exit_code(&numeric), EXIT_NUMERICAL);
        assert!(numeric.to_string().contains("dictionary block at atom 3"));
        let wrapped = anyhow::Error::new(spdkit::Error::InvalidDataset("empty".into())).context("reading");
        assert_eq!(exit_code(&wrapped), EXIT_INPUT);
        assert_eq!(exit_code(&anyhow::anyhow!("usage")), EXIT_INPUT);
    }

    #[test]
    fn provenance_names_the_command_and_version() {
        let p = Provenance::new(&["/path/to/spdkit".into(), "train".into(), "--seed".into(), "7".into()]);
        let line = p.comment(Some(7));
        assert!(line.starts_with("# spdkit "));
        assert!(line.contains("seed 7") && line.ends_with("spdkit train --seed 7"));
    }
}
