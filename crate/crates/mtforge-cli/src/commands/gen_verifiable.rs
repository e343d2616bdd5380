//! Runs the verifiable-translation funnel: sample guideline bundles,
//! generate sources, verify them, translate, and gate on quality.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use mtforge::guidelines::{
    builtin_catalog, builtin_topics, load_topics, tally, produce_samples, Catalog, FunnelCounts,
    ProduceOptions, VerifiableEndpoints, VerifiableSample,
};
use crate::commands::{CommonArgs, Runtime};
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct GenVerifiableArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// How many samples to attempt
    #[arg(long, default_value_t = 100)]
    pub count: usize,

    /// Accepted samples, one JSON object per line
    #[arg(long)]
    pub output: PathBuf,

    /// Also write rejected samples (with their rejection reasons) here
    #[arg(long)]
    pub rejected: Option<PathBuf>,
}

pub fn run(args: &GenVerifiableArgs) -> anyhow::Result<()> {
    let runtime = Runtime::load(&args.common)?;
    let gateway = runtime.gateway(&["generator", "judge", "quality"])?;
    let endpoints = VerifiableEndpoints {
        generator: "generator".into(),
        judge: "judge".into(),
        quality: "quality".into(),
    };

    let catalog = match &runtime.config.verifiable.catalog_dir {
        Some(dir) => Catalog::load_dir(dir)
            .with_context(|| format!("loading guideline specs from {}", dir.display()))?,
        None => builtin_catalog(),
    };
    let topics = match &runtime.config.verifiable.topics_file {
        Some(path) => load_topics(path)?,
        None => builtin_topics(),
    };
    let lp0 = runtime.config.verifiable.source_language.tag()?;
    let lp1 = runtime.config.verifiable.target_language.tag()?;
    let options = ProduceOptions {
        quality_gate: runtime.config.verifiable.quality_gate,
        workers: runtime.workers,
        ..ProduceOptions::default()
    };

    let samples = produce_samples(
        &gateway,
        &endpoints,
        &catalog,
        &topics,
        &lp0,
        &lp1,
        args.count,
        runtime.seed,
        &options,
    )?;
    let counts = tally(&samples);

    let (accepted, rejected): (Vec<&VerifiableSample>, Vec<&VerifiableSample>) =
        samples.iter().partition(|s| s.is_accepted());
    mtforge::jsonl::write_all(&args.output, &accepted)?;
    if let Some(path) = &args.rejected {
        mtforge::jsonl::write_all(path, &rejected)?;
    }

    let mut manifest = RunManifest::new("gen-verifiable", runtime.seed, runtime.offline);
    manifest.summary = serde_json::to_value(counts)?;
    manifest.write_beside(&args.output)?;

    print_funnel(&counts);
    Ok(())
}

fn print_funnel(counts: &FunnelCounts) {
    println!("gen-verifiable: {} accepted of {} requested", counts.accepted, counts.requested);
    println!("  source already compliant (precheck): {}", counts.precheck_rejected);
    println!("  source already compliant (judge):    {}", counts.judge_rejected);
    println!("  judge reply unparseable:             {}", counts.judge_unparseable);
    println!("  translation missing a pattern:       {}", counts.translation_rejected);
    println!("  quality below gate:                  {}", counts.quality_rejected);
}
