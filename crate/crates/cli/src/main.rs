//! Command-line interface for the stochastic forest transition model:
//! path simulation, sensitivity sweeps, threshold extraction, synthetic
//! dataset generation, and the estimation pipeline (train / eval / predict).
//!
//! Exit codes: 0 success, 2 configuration or validation failure, 3 I/O
//! failure, 4 numerical failure.

mod commands;
mod errors;
mod manifest;
mod opts;

use clap::{Parser, Subcommand};
use commands::{gendata, model, simulate, sweep};

#[derive(Parser)]
#[command(
    name = "sftm",
    version,
    about = "Stochastic forest transition model: simulation, sensitivity analysis, and parameter estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path or an ensemble and write CSV.
    Simulate(simulate::SimulateArgs),
    /// Sweep a parameter, writing the E[G(x_T)] curve and its thresholds.
    Sweep(sweep::SweepArgs),
    /// Extract sign-change thresholds from an existing curve CSV.
    Threshold(sweep::ThresholdArgs),
    /// Generate a synthetic dataset directory.
    Gendata(gendata::GendataArgs),
    /// Train the convolutional regressor on a dataset.
    Train(model::TrainArgs),
    /// Evaluate a trained model on its held-out test rows.
    Eval(model::EvalArgs),
    /// Estimate parameters from an observed series.
    Predict(model::PredictArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate::run(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Threshold(args) => sweep::run_threshold(args),
        Command::Gendata(args) => gendata::run(args),
        Command::Train(args) => model::run_train(args),
        Command::Eval(args) => model::run_eval(args),
        Command::Predict(args) => model::run_predict(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
