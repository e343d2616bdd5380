//! Triage, filter, and answer-select supervised examples.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use mtforge::sft::{curate, CurateOptions, SftEndpoints, SftExample};
use serde_json::json;

use crate::commands::{read_rows, CommonArgs, Runtime};
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct CurateSftArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Candidate examples, one JSON object per line
    #[arg(long)]
    pub input: PathBuf,

    /// Kept examples with their triage verdicts
    #[arg(long)]
    pub output: PathBuf,

    /// Also write dropped examples (with reasons) here
    #[arg(long)]
    pub dropped: Option<PathBuf>,
}

pub fn run(args: &CurateSftArgs) -> anyhow::Result<()> {
    let runtime = Runtime::load(&args.common)?;
    let examples: Vec<SftExample> = read_rows(&args.input, "curation candidates")?;
    let total = examples.len();

    let gateway = runtime.gateway(&["judge", "reward"])?;
    let endpoints = SftEndpoints { judge: "judge".into(), reward: "reward".into() };
    let options = CurateOptions {
        policy: runtime.config.sft.policy(),
        workers: runtime.workers,
        strict: runtime.strict,
        ..CurateOptions::default()
    };

    let report = curate(&gateway, &endpoints, &examples, &options)?;
    mtforge::jsonl::write_all(&args.output, &report.kept)?;
    if let Some(path) = &args.dropped {
        mtforge::jsonl::write_all(path, &report.dropped)?;
    }

    let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
    for dropped in &report.dropped {
        let key = serde_json::to_value(&dropped.reason)?
            .get("kind")
            .and_then(|k| k.as_str())
            .unwrap_or("other")
            .to_owned();
        *reasons.entry(key).or_default() += 1;
    }

    let mut manifest = RunManifest::new("curate-sft", runtime.seed, runtime.offline);
    manifest.record_input("examples", &args.input)?;
    manifest.summary = json!({
        "examples": total,
        "kept": report.kept.len(),
        "dropped": report.dropped.len(),
        "drop_reasons": reasons,
    });
    manifest.write_beside(&args.output)?;

    println!("curate-sft: kept {} of {} examples", report.kept.len(), total);
    for (reason, count) in &reasons {
        println!("  dropped ({reason}): {count}");
    }
    Ok(())
}
