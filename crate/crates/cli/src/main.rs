mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::{CheckArgs, CompareArgs, FitArgs, PredictArgs, SimulateArgs};

/// Bayesian parametric survival models.
#[derive(Parser)]
#[command(name = "bayes-surv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior of a model and write a fit bundle.
    Fit(FitArgs),
    /// Posterior predictive curves from a fit bundle.
    Predict(PredictArgs),
    /// Compare the standardised predictive survival curve with Kaplan-Meier.
    Check(CheckArgs),
    /// Rank fitted models by expected log predictive density.
    Compare(CompareArgs),
    /// Simulate a dataset from a JSON design.
    Simulate(SimulateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Check(a) => commands::check(a),
        Command::Compare(a) => commands::compare(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
