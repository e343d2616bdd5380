//! Judged head-to-head battles between a challenger and a baseline.

use std::path::PathBuf;

use clap::Args;
use mtforge::eval::arena::{run_battles, ArenaOptions, Battle};
use serde_json::json;

use crate::commands::{read_rows, CommonArgs, Runtime};
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct ArenaWinrateArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Battles, one JSON object per line
    #[arg(long)]
    pub battles: PathBuf,

    /// Where to write the battle report (JSON)
    #[arg(long)]
    pub output: PathBuf,
}

pub fn run(args: &ArenaWinrateArgs) -> anyhow::Result<()> {
    let runtime = Runtime::load(&args.common)?;
    let battles: Vec<Battle> = read_rows(&args.battles, "battles")?;
    let gateway = runtime.gateway(&["judge"])?;
    let options = ArenaOptions {
        workers: runtime.workers,
        strict: runtime.strict,
        seed: runtime.seed,
        ..ArenaOptions::default()
    };

    let report = run_battles(&gateway, "judge", &battles, &options)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&args.output, text)?;

    let mut manifest = RunManifest::new("arena-winrate", runtime.seed, runtime.offline);
    manifest.record_input("battles", &args.battles)?;
    manifest.summary = json!({
        "battles": battles.len(),
        "wins": report.tally.wins,
        "losses": report.tally.losses,
        "ties": report.tally.ties,
        "unscored": report.unscored,
        "win_rate": report.win_rate(),
    });
    manifest.write_beside(&args.output)?;

    match report.win_rate() {
        Some(rate) => println!(
            "arena-winrate: {:.1}% over {} judged battles ({} wins, {} losses, {} ties, {} unscored)",
            rate * 100.0,
            report.tally.judged(),
            report.tally.wins,
            report.tally.losses,
            report.tally.ties,
            report.unscored
        ),
        None => println!("arena-winrate: no battles could be judged"),
    }
    Ok(())
}
