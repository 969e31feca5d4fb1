//! `chiral`: verification suites, traveling-wave reduction, soliton
//! profiles and planar simulations.
//!
//! Exit status is 0 on success, 1 when a check fails or a run breaks down,
//! and 2 on a usage error.

mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use chiral_core::Error as CoreError;
use clap::{Parser, Subcommand};

use commands::{Outcome, Suite};
use settings::{BranchArg, DirectionArg, MaterialArgs, Settings, SimArgs, UsageError};

#[derive(Debug, Parser)]
#[command(name = "chiral", version, about = "Chiral Cosserat planar waves: checks, reduction, solitons, simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run verification suites and print a JSON report
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Random configurations per randomized check
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the traveling-wave constants as JSON
    Reduce {
        #[command(flatten)]
        material: MaterialArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the perturbative soliton profile as CSV
    Soliton {
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        chi_tilde: f64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=2))]
        order: u8,
        #[arg(long, value_enum, default_value = "piecewise")]
        branch: BranchArg,
        /// Sample interval `a:b`
        #[arg(long, default_value = "-5:5", allow_hyphen_values = true, value_parser = commands::parse_range)]
        range: (f64, f64),
        #[arg(long, default_value_t = 1001)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evolve soliton initial data and write snapshots and a summary
    Simulate {
        #[command(flatten)]
        material: MaterialArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
        /// Steps between CSV snapshots
        #[arg(long)]
        snapshot_every: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the left-mover with the reflected right-mover
    MirrorCheck {
        #[command(flatten)]
        material: MaterialArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Verify {
            suite,
            trials,
            seed,
            out,
        } => commands::verify(suite, trials, seed, out.as_deref()),
        Command::Reduce { material, out } => {
            let s = Settings::gather(material.params.as_deref(), Settings::from_material(&material))?;
            commands::reduce(&s, out.as_deref())
        }
        Command::Soliton {
            m,
            chi_tilde,
            order,
            branch,
            range,
            samples,
            out,
        } => commands::soliton(m, chi_tilde, order, branch, range, samples, out.as_deref()),
        Command::Simulate {
            material,
            sim,
            direction,
            snapshot_every,
            out,
        } => {
            let flags = Settings {
                direction,
                snapshot_every,
                ..Settings::from_material(&material).with_sim(&sim)
            };
            let s = Settings::gather(material.params.as_deref(), flags)?;
            commands::simulate(&s, out.as_deref())
        }
        Command::MirrorCheck {
            material,
            sim,
            tol,
            out,
        } => {
            let flags = Settings {
                tol,
                ..Settings::from_material(&material).with_sim(&sim)
            };
            let s = Settings::gather(material.params.as_deref(), flags)?;
            commands::mirror(&s, out.as_deref())
        }
    }
}

/// Bad parameter values count as usage errors, numerical breakdowns as
/// failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<CoreError>() {
        Some(
            CoreError::InvalidInput(_)
            | CoreError::Config(_)
            | CoreError::SingularParameter(_)
            | CoreError::GridTooNarrow { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(cli) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
