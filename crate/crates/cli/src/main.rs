use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod error;
mod io;

/// Event-camera graph generation toolkit.
#[derive(Debug, Parser)]
#[command(name = "evgraph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a graph from an event file.
    Build(commands::BuildArgs),
    /// Run the cycle-level pipeline model over an event file.
    Simulate(commands::SimulateArgs),
    /// Mean node/edge counts over a manifest of samples.
    Stats(commands::StatsArgs),
    /// Transcode between event formats or between graph formats.
    Convert(commands::ConvertArgs),
    /// One graph-convolution forward pass over a COO graph.
    Pointnet(commands::PointnetArgs),
    /// Write a synthetic Poisson event stream.
    Synth(commands::SynthArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Build(a) => commands::build(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Stats(a) => commands::stats(a),
        Command::Convert(a) => commands::convert(a),
        Command::Pointnet(a) => commands::pointnet(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evgraph: error: {e}");
            e.exit_code()
        }
    }
}
