//! `simlab` command-line driver.
//!
//! Exit codes: 0 success, 1 suite failure, 2 config or I/O error,
//! 3 ambiguous classification, 4 blow-up.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "simlab", version, about = "Invariant-manifold analysis of analytic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lie-closure rank, leaf classification and degeneracy at one point.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Report file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate gradient flow; writes trajectory.csv and summary.json.
    Flow {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario suite.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run analyze, verify or leaf enumeration over a grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Activation registry with parity and classification.
    ListActivations {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Lib(simlab::Error),
}

impl From<simlab::Error> for CliError {
    fn from(e: simlab::Error) -> Self {
        CliError::Lib(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    SuiteFailed,
    Ambiguous,
    BlewUp,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Ok => 0,
            Outcome::SuiteFailed => 1,
            Outcome::Ambiguous => 3,
            Outcome::BlewUp => 4,
        }
    }

    /// Worst outcome first: blow-up, ambiguity, failure.
    pub fn worst(self, other: Outcome) -> Outcome {
        let rank = |o: Outcome| match o {
            Outcome::Ok => 0,
            Outcome::SuiteFailed => 1,
            Outcome::Ambiguous => 2,
            Outcome::BlewUp => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

fn error_code(e: &CliError) -> u8 {
    use simlab::Error as E;
    match e {
        CliError::Config(_) | CliError::Io(_) => 2,
        CliError::Lib(E::Ambiguous { .. }) => 3,
        CliError::Lib(E::FlowNonFinite { .. }) => 4,
        CliError::Lib(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze { config, out } => commands::analyze(&config, out.as_deref()),
        Command::Flow { config, out } => commands::flow(&config, &out),
        Command::Verify { config, suite, out } => commands::verify(config.as_deref(), suite.as_deref(), out.as_deref()),
        Command::Sweep { config, out } => commands::sweep(&config, &out),
        Command::ListActivations { out } => commands::list_activations(out.as_deref()),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("simlab: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
