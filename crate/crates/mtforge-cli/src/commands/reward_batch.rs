//! Computes rewards for policy outputs: pattern-verified translation
//! rewards, or preference-evaluation verdict rewards.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::bail;
use clap::{Args, ValueEnum};
use mtforge::rewards::{
    preference_eval_reward, reward_batch, PreferenceEvalTask, RewardOptions, RewardTask,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::commands::{read_rows, CommonArgs, Runtime};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RewardKind {
    /// Regex-verified translation rewards gated on estimated quality
    Translation,
    /// Verdict rewards for judging a chosen/rejected pair
    PreferenceEval,
}

#[derive(Debug, Args)]
pub struct RewardBatchArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long, value_enum, default_value_t = RewardKind::Translation)]
    pub kind: RewardKind,

    /// Translation: reward tasks. Preference-eval: preference pairs
    #[arg(long)]
    pub input: PathBuf,

    /// Preference-eval only: model outputs, one {"id", "output"} per line
    #[arg(long)]
    pub responses: Option<PathBuf>,

    /// Rewards, one JSON object per line
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Deserialize, Serialize)]
struct ResponseRow {
    id: String,
    output: String,
}

pub fn run(args: &RewardBatchArgs) -> anyhow::Result<()> {
    match args.kind {
        RewardKind::Translation => run_translation(args),
        RewardKind::PreferenceEval => run_preference_eval(args),
    }
}

fn run_translation(args: &RewardBatchArgs) -> anyhow::Result<()> {
    let runtime = Runtime::load(&args.common)?;
    let tasks: Vec<RewardTask> = read_rows(&args.input, "reward tasks")?;
    let gateway = runtime.gateway(&["reward"])?;
    let options = RewardOptions {
        mode: runtime.config.rewards.reward_mode()?,
        quality_gate: runtime.config.rewards.quality_gate,
        workers: runtime.workers,
    };

    let rewards = reward_batch(&gateway, "reward", &tasks, &options)?;
    let gated = rewards.iter().filter(|r| r.quality_gated).count();
    let nonzero = rewards.iter().filter(|r| r.reward > 0.0).count();
    mtforge::jsonl::write_all(&args.output, &rewards)?;

    let mut manifest = RunManifest::new("reward-batch", runtime.seed, runtime.offline);
    manifest.record_input("tasks", &args.input)?;
    manifest.summary = json!({
        "kind": "translation",
        "tasks": tasks.len(),
        "quality_gated": gated,
        "nonzero": nonzero,
    });
    manifest.write_beside(&args.output)?;

    println!(
        "reward-batch: {} tasks, {} nonzero rewards, {} quality-gated",
        tasks.len(),
        nonzero,
        gated
    );
    Ok(())
}

fn run_preference_eval(args: &RewardBatchArgs) -> anyhow::Result<()> {
    let runtime = Runtime::load(&args.common)?;
    let Some(responses_path) = &args.responses else {
        bail!("--kind preference-eval needs --responses");
    };
    let pairs: Vec<mtforge::prefs::PreferencePair> = read_rows(&args.input, "preference pairs")?;
    let responses: Vec<ResponseRow> = read_rows(responses_path, "model responses")?;
    let by_id: BTreeMap<&str, &str> =
        responses.iter().map(|r| (r.id.as_str(), r.output.as_str())).collect();

    let mut rewards = Vec::with_capacity(pairs.len());
    let mut missing = 0usize;
    for pair in pairs {
        let id = pair.id.clone();
        let task = PreferenceEvalTask::from_pair(pair, runtime.seed);
        match by_id.get(id.as_str()) {
            Some(output) => rewards.push(preference_eval_reward(&task, output)),
            None => missing += 1,
        }
    }
    let correct = rewards.iter().filter(|r| r.reward > 0.0).count();
    mtforge::jsonl::write_all(&args.output, &rewards)?;

    let mut manifest = RunManifest::new("reward-batch", runtime.seed, runtime.offline);
    manifest.record_input("pairs", &args.input)?;
    manifest.record_input("responses", responses_path)?;
    manifest.summary = json!({
        "kind": "preference_eval",
        "pairs": rewards.len() + missing,
        "scored": rewards.len(),
        "missing_responses": missing,
        "correct": correct,
    });
    manifest.write_beside(&args.output)?;

    println!(
        "reward-batch: {} verdicts scored, {} correct, {} without responses",
        rewards.len(),
        correct,
        missing
    );
    Ok(())
}
