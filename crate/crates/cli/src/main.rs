//! `chan`: data generation, segmentation, training, summarization,
//! evaluation and gradient self-checks from the command line.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::output::Failure;

#[derive(Parser)]
#[command(name = "chan", version, about = "Query-focused video summarization with a convolutional hierarchical attention network")]
#[command(after_help = "Logging goes to stderr; set CHAN_LOG_LEVEL to error, warn, info or debug.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset directory with planted concept signals.
    GenData(args::GenDataArgs),
    /// Split a shot feature file into segments with kernel temporal segmentation.
    Segment(args::SegmentArgs),
    /// Train on one fold, then evaluate the fold's test video.
    Train(args::TrainArgs),
    /// Score and select shots for (video, query) pairs with a trained checkpoint.
    Summarize(args::SummarizeArgs),
    /// Score candidate summaries against reference summaries.
    Evaluate(args::EvaluateArgs),
    /// Check every analytic gradient against finite differences.
    Gradcheck(args::GradcheckArgs),
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Segment(a) => commands::segment(a),
        Command::Train(a) => commands::train(a),
        Command::Summarize(a) => commands::summarize(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CHAN_LOG_LEVEL", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return Failure::usage(e.render().to_string()).report(),
    };
    run(cli.command).unwrap_or_else(Failure::report)
}
