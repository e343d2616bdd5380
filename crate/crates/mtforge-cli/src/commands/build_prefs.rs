//! Builds chosen/rejected preference pairs from candidate pools, with a
//! metric-and-judge double check, plus post-edited outputs when given.

use std::path::PathBuf;

use clap::Args;
use mtforge::gateway::GenParams;
use mtforge::hashing::stable_u64;
use mtforge::model::Conversation;
use mtforge::pipeline::par_map_ordered;
use mtforge::prefs::{
    build_preferences, ingest_post_edits, PostEdit, PrefEndpoints, PrefError, PrefOptions,
    PreferenceCandidates,
};
use serde_json::json;

use crate::commands::{read_rows, CommonArgs, Runtime};
use crate::manifest::RunManifest;

const CANDIDATE_DATASET: &str = "mbr-candidates";

#[derive(Debug, Args)]
pub struct BuildPrefsArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Candidate pools, one JSON object per line; pools with an empty
    /// candidate list are filled by sampling the generator endpoint
    #[arg(long)]
    pub input: PathBuf,

    /// Post-edited outputs to fold in as additional pairs
    #[arg(long)]
    pub post_edits: Option<PathBuf>,

    /// Preference pairs, one JSON object per line
    #[arg(long)]
    pub output: PathBuf,

    /// Also write dropped pools (with reasons) here
    #[arg(long)]
    pub dropped: Option<PathBuf>,
}

pub fn run(args: &BuildPrefsArgs) -> anyhow::Result<()> {
    let runtime = Runtime::load(&args.common)?;
    let mut pools: Vec<PreferenceCandidates> = read_rows(&args.input, "candidate pools")?;
    let total = pools.len();
    let needs_sampling = pools.iter().filter(|p| p.candidates.is_empty()).count();

    let mut roles = vec!["mbr_metric", "check_metric", "judge"];
    if needs_sampling > 0 {
        roles.push("generator");
    }
    let gateway = runtime.gateway(&roles)?;

    if needs_sampling > 0 {
        let temperature = runtime.config.mbr.temperature;
        let num_candidates = runtime.config.mbr.num_candidates;
        let seed = runtime.seed;
        let filled = par_map_ordered(pools, runtime.workers, |_, mut pool| {
            if !pool.candidates.is_empty() {
                return Ok(pool);
            }
            let mut params = GenParams::sampling(temperature, num_candidates);
            params.seed = Some(stable_u64(&["mbr-candidates", &seed.to_string(), &pool.id]));
            let prompt = Conversation::from_prompt(pool.instruction.clone(), CANDIDATE_DATASET);
            pool.candidates = gateway.generate("generator", &prompt, &params)?;
            Ok(pool)
        });
        pools = filled.into_iter().collect::<Result<Vec<_>, PrefError>>()?;
    }

    let endpoints = PrefEndpoints {
        mbr_utility: "mbr_metric".into(),
        second_metric: "check_metric".into(),
        judge: "judge".into(),
    };
    let options = PrefOptions {
        workers: runtime.workers,
        strict: runtime.strict,
        seed: runtime.seed,
        ..PrefOptions::default()
    };
    let mut report = build_preferences(&gateway, &endpoints, &pools, &options)?;
    let mbr_pairs = report.pairs.len();

    let mut post_edit_pairs = 0usize;
    let mut unedited = 0usize;
    if let Some(path) = &args.post_edits {
        let edits: Vec<PostEdit> = read_rows(path, "post-edits")?;
        let (pairs, skipped) = ingest_post_edits(&edits);
        post_edit_pairs = pairs.len();
        unedited = skipped;
        report.pairs.extend(pairs);
    }

    mtforge::jsonl::write_all(&args.output, &report.pairs)?;
    if let Some(path) = &args.dropped {
        mtforge::jsonl::write_all(path, &report.dropped)?;
    }

    let mut manifest = RunManifest::new("build-prefs", runtime.seed, runtime.offline);
    manifest.record_input("pools", &args.input)?;
    if let Some(path) = &args.post_edits {
        manifest.record_input("post_edits", path)?;
    }
    manifest.summary = json!({
        "pools": total,
        "sampled_pools": needs_sampling,
        "mbr_pairs": mbr_pairs,
        "dropped": report.dropped.len(),
        "post_edit_pairs": post_edit_pairs,
        "unedited_skipped": unedited,
    });
    manifest.write_beside(&args.output)?;

    println!(
        "build-prefs: {} pairs from {} pools ({} dropped, {} post-edit pairs, {} unedited)",
        report.pairs.len(),
        total,
        report.dropped.len(),
        post_edit_pairs,
        unedited
    );
    Ok(())
}
