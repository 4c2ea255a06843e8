// SPDX-License-Identifier: Apache-2.0
//! `rram-cnn`: compile, run and cost a 1D CNN on simulated RRAM crossbars.
//!
//! Data goes to files under `--out`; everything printed is a diagnostic on
//! stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "rram-cnn",
    version,
    about = "RRAM crossbar simulator for a parallel 1D CNN"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run inference on an input set and write logits and metrics.
    Infer(InferArgs),
    /// Sweep one non-ideality knob over several values and seeds.
    Sweep(SweepArgs),
    /// Compare programming with and without stuck weight offsetting.
    Mitigate(MitigateArgs),
    /// Area, power, latency and energy of the accelerator.
    Cost(CostArgs),
    /// Compile a mapping plan and print the cell budget table.
    Plan(PlanArgs),
    /// Write a synthetic separable task (weights plus labelled inputs).
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// MXW1 weight file.
    #[arg(long)]
    pub weights: PathBuf,
    /// Mapping scheme: staggered or stationary.
    #[arg(long, default_value = "stationary")]
    pub scheme: String,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// MXI1 input file.
    #[arg(long)]
    pub inputs: PathBuf,
    /// Non-ideality configuration (JSON); defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// MXI1 set used to fix converter ranges; defaults to --inputs.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// DAC input ranges per layer: calibrated or worst.
    #[arg(long, default_value = "calibrated")]
    pub input_range: String,
    /// ADC full scale per layer: calibrated or worst.
    #[arg(long, default_value = "calibrated")]
    pub adc_range: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Device seed; overrides rng_seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Recording duration in hours, for false positives per hour.
    #[arg(long)]
    pub hours: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SeedArgs {
    /// First seed.
    #[arg(long, default_value_t = 5)]
    pub seed: u64,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Configuration field to vary, or stuck_rate.
    #[arg(long)]
    pub knob: String,
    /// Comma separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct MitigateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Comma separated stuck rates, split evenly between stuck-on and stuck-off.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
    pub rates: Vec<f64>,
    /// Also run this many random-matrix trials per rate.
    #[arg(long, default_value_t = 0)]
    pub matrix_trials: u64,
}

#[derive(Args, Debug)]
pub struct CostArgs {
    /// MXW1 weights; the canonical architecture is costed when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value = "stationary")]
    pub scheme: String,
    /// tdm or parallel.
    #[arg(long, default_value = "tdm")]
    pub variant: String,
    /// on (all devices at R_on) or mid (midpoint resistance).
    #[arg(long, default_value = "mid")]
    pub scenario: String,
    #[arg(long, default_value_t = 64)]
    pub input_length: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 64)]
    pub input_length: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub seed: u64,
    /// Number of samples (even).
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Infer(a) => commands::infer(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Mitigate(a) => commands::mitigate(&a),
        Command::Cost(a) => commands::cost(&a),
        Command::Plan(a) => commands::plan(&a),
        Command::Synth(a) => commands::synth(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
