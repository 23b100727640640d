//! Command-line front door for the weighted co-training lab.
//!
//! Subcommands: `synth` (synthetic benchmark files), `label` (pseudo-label
//! generation), `train` (one pipeline run into a seed-named directory),
//! `ablate` (variants x seeds with Friedman-ranked summary), and `report`
//! (merge run directories). Exit codes: 0 success, 1 usage, 2 data error,
//! 3 runtime error.

use clap::{Parser, Subcommand};

pub mod ablate;
pub mod config;
pub mod io;
pub mod label;
pub mod report;
pub mod synth;
pub mod train;

pub use ablate::AblateArgs;
pub use config::{ConfigFile, TrainOverrides};
pub use label::LabelArgs;
pub use report::ReportArgs;
pub use synth::SynthArgs;
pub use train::TrainArgs;

/// CLI failure with its exit-code class.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Runtime(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self {
            CliError::Usage(_) => "usage error",
            CliError::Data(_) => "data error",
            CliError::Runtime(_) => "runtime error",
        };
        write!(f, "{kind}: {}", self.message())
    }
}

impl std::error::Error for CliError {}

impl From<cotrain_core::Error> for CliError {
    fn from(e: cotrain_core::Error) -> Self {
        use cotrain_core::Error as E;
        match &e {
            E::InvalidConfig(_) | E::UnknownVariant(_) | E::MissingInput(_) => {
                CliError::Usage(e.to_string())
            }
            E::Parse { .. }
            | E::DuplicateId(_)
            | E::LabelOutOfRange { .. }
            | E::UnknownId(_)
            | E::InvalidTemplate(_)
            | E::InvalidNoiseModel(_)
            | E::Io(_)
            | E::Json(_)
            | E::Csv(_) => CliError::Data(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "cotrain",
    about = "Weighted co-training lab: synthetic data, pseudo-labeling, training, ablation, and reporting",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic labeled/unlabeled/test splits plus a gold sidecar.
    Synth(SynthArgs),
    /// Produce a pseudo-label file from an oracle, a file, or an endpoint.
    Label(LabelArgs),
    /// Run one training variant into a seed-named run directory.
    Train(TrainArgs),
    /// Run several variants over several seeds and rank them.
    Ablate(AblateArgs),
    /// Merge run directories into a consolidated report.
    Report(ReportArgs),
}

/// Execute a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(args) => synth::run(&args),
        Command::Label(args) => label::run(&args),
        Command::Train(args) => train::run(&args).map(|_| ()),
        Command::Ablate(args) => ablate::run(&args),
        Command::Report(args) => report::run(&args),
    }
}
