//! `exea`: explain and repair embedding-based entity alignment.
//!
//! Every subcommand reads a dataset directory (`kg1/`, `kg2/`, `seeds.tsv`
//! and optionally `test.tsv`, `pred.tsv`, `emb.tsv`), writes its outputs
//! atomically into `--out`, and records a `manifest.json` with hashes of the
//! resolved config, the inputs and the outputs.

use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

mod commands;
mod config;
mod failure;
mod output;

use config::*;

#[derive(Parser, Debug)]
#[command(name = "exea", version, about = "Explain and repair embedding-based entity alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train translational embeddings for both graphs
    Train(TrainCmd),
    /// Align test sources greedily by embedding similarity
    Infer(InferCmd),
    /// Explain predicted pairs by matched neighbors and paths
    Explain(ExplainCmd),
    /// Build the alignment dependency graph of each predicted pair
    Adg(AdgCmd),
    /// Repair the predicted alignment
    Repair(RepairCmd),
    /// Measure accuracy, sparsity, fidelity or run an ablation
    Eval(EvalCmd),
    /// Write a synthetic dataset or a named fixture
    Synth(SynthCmd),
}

#[derive(clap::Args, Debug)]
struct TrainCmd {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten, next_help_heading = "Trainer")]
    train: TrainOpts,
}

#[derive(clap::Args, Debug)]
struct InferCmd {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    emb: EmbeddingOpts,
}

#[derive(clap::Args, Debug)]
struct ExplainCmd {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    emb: EmbeddingOpts,
    #[command(flatten)]
    pred: PredictionOpts,
    #[command(flatten, next_help_heading = "Explanation")]
    explain: ExplainOpts,
}

#[derive(clap::Args, Debug)]
struct AdgCmd {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    emb: EmbeddingOpts,
    #[command(flatten)]
    pred: PredictionOpts,
    #[command(flatten, next_help_heading = "Explanation")]
    explain: ExplainOpts,
    #[command(flatten, next_help_heading = "Dependency graph")]
    adg: AdgOpts,
}

#[derive(clap::Args, Debug)]
struct RepairCmd {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    emb: EmbeddingOpts,
    #[command(flatten)]
    pred: PredictionOpts,
    #[command(flatten, next_help_heading = "Explanation")]
    explain: ExplainOpts,
    #[command(flatten, next_help_heading = "Dependency graph")]
    adg: AdgOpts,
    #[command(flatten, next_help_heading = "Repair")]
    repair: RepairOpts,
}

#[derive(clap::Args, Debug)]
struct EvalCmd {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    emb: EmbeddingOpts,
    #[command(flatten)]
    pred: PredictionOpts,
    #[command(flatten, next_help_heading = "Evaluation")]
    eval: EvalOpts,
    #[command(flatten, next_help_heading = "Explanation")]
    explain: ExplainOpts,
    #[command(flatten, next_help_heading = "Dependency graph")]
    adg: AdgOpts,
    #[command(flatten, next_help_heading = "Repair")]
    repair: RepairOpts,
    #[command(flatten, next_help_heading = "Trainer")]
    train: TrainOpts,
}

#[derive(clap::Args, Debug)]
struct SynthCmd {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten, next_help_heading = "Generator")]
    synth: SynthOpts,
}

/// Every long flag of every subcommand, as a config key.
fn known_keys() -> Vec<String> {
    let cmd = Cli::command();
    let mut keys: Vec<String> = cmd
        .get_subcommands()
        .flat_map(|s| s.get_arguments().filter_map(|a| a.get_long()).map(|l| l.replace('-', "_")).collect::<Vec<_>>())
        .filter(|k| k != "config" && k != "help")
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(c) => commands::train(c),
        Command::Infer(c) => commands::infer(c),
        Command::Explain(c) => commands::explain(c),
        Command::Adg(c) => commands::adg(c),
        Command::Repair(c) => commands::repair(c),
        Command::Eval(c) => commands::eval(c),
        Command::Synth(c) => commands::synth(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => failure::report(&e),
    }
}
