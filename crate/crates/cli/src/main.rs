//! `betadyn`: simulations, densities, spectral analysis and self-checks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

mod commands;
mod config;
mod error;
mod verify;

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "betadyn", version, about = "Beta-ensemble eigenvalue dynamics and crossover densities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the eigenvalue SDE and record spectra.
    SimulateSde(SdeArgs),
    /// Run the switched free/commuting matrix diffusion and record spectra.
    SimulateMatrix(MatrixArgs),
    /// Tabulate a density on a grid.
    Density(DensityArgs),
    /// Histogram, spacing distribution or moments of a samples CSV.
    Analyze(AnalyzeArgs),
    /// Run a built-in consistency suite and print a report.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKind {
    Gaussian,
    Semicircle,
    Kerov,
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyzeKind {
    Nnsd,
    Histogram,
    Moments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Surmise,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Moments,
    Density,
    Special,
}

#[derive(Args, Debug)]
pub struct SdeArgs {
    /// JSON file with option values (or a manifest); flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_dim: Option<usize>,
    /// Fixed Dyson index.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Crossover parameter, beta = 2c/N.
    #[arg(long, allow_negative_numbers = true)]
    pub c_param: Option<f64>,
    /// Switch-on probability per interval.
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// Switching intervals per unit time (with --p).
    #[arg(long)]
    pub switch_rate: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Time between recorded samples.
    #[arg(long, allow_negative_numbers = true)]
    pub stride: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MatrixArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_dim: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long)]
    pub switch_rate: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub stride: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Start every replica from this matrix snapshot instead of zero.
    #[arg(long)]
    pub start: Option<String>,
    /// Write the final matrix of each replica as a binary snapshot.
    #[arg(long)]
    pub snapshot: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DensityArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<DensityKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub c_param: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n_dim: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// lo:hi:count
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; the manifest goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub what: Option<AnalyzeKind>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Samples CSV (t, lambda_1..lambda_N).
    #[arg(long)]
    pub input: Option<String>,
    /// Dyson index used for unfolding and the reference curve.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Central fraction of each spectrum used for spacings.
    #[arg(long, allow_negative_numbers = true)]
    pub bulk_fraction: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// lo:hi
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    #[arg(long = "ref", value_enum)]
    pub reference: Option<Reference>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    #[arg(long, allow_negative_numbers = true)]
    pub c_param: Option<f64>,
    #[arg(long)]
    pub n_dim: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for the manifest; nothing is written without it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SimulateSde(a) => commands::simulate_sde(a),
        Command::SimulateMatrix(a) => commands::simulate_matrix(a),
        Command::Density(a) => commands::density(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Verify(a) => verify::verify(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
