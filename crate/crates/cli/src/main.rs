mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigError;

/// Stereo image super-resolution: data synthesis, training, inference,
/// evaluation and gradient checks.
#[derive(Parser, Debug)]
#[command(name = "nafssr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Key/value config file; relative paths inside resolve against it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.iters=100`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic stereo dataset with a manifest.
    Synth(commands::SynthArgs),
    /// Train a model on a manifest.
    Train(commands::TrainArgs),
    /// Super-resolve one low-resolution stereo pair.
    Infer(commands::InferArgs),
    /// Score a checkpoint on a manifest.
    Eval(commands::EvalArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(commands::GradcheckArgs),
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

/// A failed numerical check; exits with the numerical failure code.
#[derive(Debug)]
pub struct NumericFailure(pub String);

impl std::fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if cause.is::<NumericFailure>() {
            return EXIT_NUMERIC;
        }
        if let Some(e) = cause.downcast_ref::<nafssr::Error>() {
            use nafssr::Error as E;
            return match e {
                E::Config(_) | E::InvalidArgument { .. } => EXIT_CONFIG,
                E::Data { .. } | E::Io { .. } | E::Checkpoint { .. } | E::ShapeMismatch { .. } => EXIT_DATA,
                E::Diverged { .. } | E::NonFinite(_) | E::NonFiniteGradient(_) => EXIT_NUMERIC,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_DATA;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Infer(a) => commands::infer(a),
        Command::Eval(a) => commands::eval(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
