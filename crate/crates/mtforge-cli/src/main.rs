//! Command-line front end for the mtforge data pipelines.

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mtforge_cli::commands::{
    arena_winrate, build_prefs, config_init, corpus_prep, curate_sft, eval_chrf, eval_ifmt,
    gen_ifmt, gen_verifiable, reward_batch,
};
use mtforge_cli::classify_error;

#[derive(Parser)]
#[command(
    name = "mtforge",
    version,
    about = "Build and evaluate instruction-following translation data",
    long_about = "Data pipelines for instruction-following translation models: corpus \
                  preparation, verifiable instruction generation, supervised-example \
                  curation, preference building, reward computation, and evaluation. \
                  Every neural model is an external HTTP service; pass --offline to run \
                  against deterministic built-in stand-ins."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a commented starter configuration
    ConfigInit(config_init::ConfigInitArgs),
    /// Render parallel pairs into continued-pretraining documents
    CorpusPrep(corpus_prep::CorpusPrepArgs),
    /// Generate translations whose instructions can be checked with regexes
    GenVerifiable(gen_verifiable::GenVerifiableArgs),
    /// Triage, filter, and answer-select supervised examples
    CurateSft(curate_sft::CurateSftArgs),
    /// Extract double-checked preference pairs from candidate pools
    BuildPrefs(build_prefs::BuildPrefsArgs),
    /// Compute rewards for policy outputs
    RewardBatch(reward_batch::RewardBatchArgs),
    /// Score hypotheses against references with character n-gram F-scores
    EvalChrf(eval_chrf::EvalChrfArgs),
    /// Generate instruction-following translation tasks
    GenIfmt(gen_ifmt::GenIfmtArgs),
    /// Dual-score system outputs on instruction-following tasks
    EvalIfmt(eval_ifmt::EvalIfmtArgs),
    /// Judge head-to-head battles and report the challenger's win rate
    ArenaWinrate(arena_winrate::ArenaWinrateArgs),
}

fn dispatch(command: &Command) -> anyhow::Result<()> {
    match command {
        Command::ConfigInit(args) => config_init::run(args),
        Command::CorpusPrep(args) => corpus_prep::run(args),
        Command::GenVerifiable(args) => gen_verifiable::run(args),
        Command::CurateSft(args) => curate_sft::run(args),
        Command::BuildPrefs(args) => build_prefs::run(args),
        Command::RewardBatch(args) => reward_batch::run(args),
        Command::EvalChrf(args) => eval_chrf::run(args),
        Command::GenIfmt(args) => gen_ifmt::run(args),
        Command::EvalIfmt(args) => eval_ifmt::run(args),
        Command::ArenaWinrate(args) => arena_winrate::run(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify_error(&err))
        }
    }
}
