//! `splitmetric`: optimal training-set size for linear regression, plus the
//! simulation and benchmark harnesses that check it.
//!
//! Exit status is 0 on success, 2 for usage or domain errors, 1 for internal
//! numerical failures.

mod commands;
mod output;

use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AsymptoticArgs, BenchArgs, MomentsArgs, Shape, SimulateArgs};
use output::{Format, Report};

#[derive(Debug, Parser)]
#[command(
    name = "splitmetric",
    version,
    about = "Optimal train/test split sizes for least-squares regression"
)]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,
    /// Worker threads for simulate, moments and bench. Output does not depend on it.
    #[arg(long, env = "SPLITMETRIC_THREADS", global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal training size p* for an m x n design.
    Solve(Shape),
    /// Closed-form integrity metric over every admissible p.
    Curve(Shape),
    /// Large-m expansion of p* against the exact root.
    Asymptotic(AsymptoticArgs),
    /// Monte Carlo estimate of the integrity metric for each p.
    Simulate(SimulateArgs),
    /// Closed-form inverse eigenvalue moments against matrix-model samples.
    Moments(MomentsArgs),
    /// Permutation losses of the half, three-quarter and optimal split policies on a dataset.
    Bench(BenchArgs),
}

fn run(cli: &Cli) -> splitmetric::Result<Report> {
    match &cli.command {
        Command::Solve(s) => commands::solve(s),
        Command::Curve(s) => commands::curve(s),
        Command::Asymptotic(a) => commands::asymptotic(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Moments(a) => commands::moments(a),
        Command::Bench(a) => {
            let (report, notes) = commands::bench(a)?;
            for note in notes {
                eprintln!("note: {note}");
            }
            Ok(report)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };

    let result = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t.into()).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => {
                eprintln!("error: cannot start {t} worker threads: {e}");
                return ExitCode::from(1);
            }
        },
        None => run(&cli),
    };

    match result {
        Ok(report) => {
            let stdout = io::stdout();
            let stderr = io::stderr();
            let written = report
                .write(cli.format, &mut stdout.lock(), &mut stderr.lock())
                .and_then(|()| io::stdout().flush());
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: writing output: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
