mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;

/// Steady states of quadratic lattice models with periodically reset environments.
#[derive(Parser)]
#[command(name = "quadreset", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep environment temperatures and report how thermal the system steady state is (CSV).
    RingThermalisation(CommonArgs),
    /// Solve for the steady state of one model and protocol (JSON).
    SteadyState(CommonArgs),
    /// Check whether an empty system stays empty under continuous resetting (JSON).
    QubitInit(CommonArgs),
    /// Single-particle energies or map eigenvalues (CSV).
    Spectrum(CommonArgs),
}

#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Reset mode: RI, EC, custom, or both (sweep only).
    #[arg(long)]
    pub mode: Option<String>,
    /// Inverse temperature(s), comma separated; `inf` for the ground state.
    #[arg(long)]
    pub beta: Option<String>,
    /// Reset period; 0 selects the continuous-resetting limit.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Worker threads for parameter sweeps.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    Invalid(String),
    /// A solver failed (exit 3).
    Numerical { code: &'static str, message: String },
    /// The requested condition does not hold (exit 1).
    Violation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Violation(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            CliError::Violation(_) => "violation",
            CliError::Invalid(_) => "invalid_argument",
            CliError::Numerical { code, .. } => code,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Violation(m) => f.write_str(m),
            CliError::Numerical { message, .. } => f.write_str(message),
        }
    }
}

impl From<quadratic_reset::Error> for CliError {
    fn from(e: quadratic_reset::Error) -> Self {
        use quadratic_reset::Error as E;
        match e {
            E::InvalidArgument(m) => CliError::Invalid(m),
            E::ResourceLimit(m) => CliError::Invalid(format!("resource limit: {m}")),
            other => CliError::Numerical { code: other.code(), message: other.to_string() },
        }
    }
}

type Handler = fn(&CommonArgs, &ExperimentConfig) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, run): (&CommonArgs, Handler) = match &cli.command {
        Command::RingThermalisation(a) => (a, commands::ring_thermalisation),
        Command::SteadyState(a) => (a, commands::steady_state),
        Command::QubitInit(a) => (a, commands::qubit_init),
        Command::Spectrum(a) => (a, commands::spectrum),
    };
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    run(args, &cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.code(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(e.exit_code())
        }
    }
}
