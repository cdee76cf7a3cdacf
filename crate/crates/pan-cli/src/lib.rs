//! Command-line front end for the `pan-core` entity-typing model: run
//! configuration, on-disk formats, and the `pan` binary's subcommands.

pub mod commands;
pub mod config;
pub mod formats;

use pan_core::data::DataError;
use pan_core::pipeline::TrainError;

/// Errors surfaced to the user, split by exit code: usage and configuration
/// problems exit 2, runtime failures exit 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<TrainError> for CliError {
    /// Bad configuration or data is the caller's mistake; numeric blow-ups
    /// and optimizer rejections mid-run are runtime failures.
    fn from(e: TrainError) -> Self {
        match &e {
            TrainError::BadConfig { .. } | TrainError::Data(_) => CliError::Usage(e.to_string()),
            TrainError::NonFiniteLoss { .. } | TrainError::Update { .. } | TrainError::Numerics(_) => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Dispatch a parsed command line: load the optional config file, merge it
/// with the flags, and run the subcommand.
pub fn run(cli: config::Cli) -> Result<(), CliError> {
    let file = config::load_file(cli.config.as_deref())?;
    match cli.command {
        config::Command::Train(args) => commands::train(config::resolve_train(&file, &args)?),
        config::Command::Eval(args) => commands::eval(config::resolve_eval(&file, &args)?),
        config::Command::Predict(args) => {
            commands::predict(config::resolve_predict(&file, &args)?)
        }
        config::Command::Synth(args) => commands::synth(config::resolve_synth(&file, &args)?),
        config::Command::Gradcheck(args) => {
            commands::gradcheck(config::resolve_gradcheck(&file, &args)?)
        }
        config::Command::Experiment(args) => {
            commands::experiment(config::resolve_experiment(&file, &args)?)
        }
    }
}
