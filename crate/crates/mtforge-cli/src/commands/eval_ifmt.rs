//! Dual-scores system outputs on instruction-following translation
//! tasks: a judged rule-adherence score and a learned quality score.

use std::path::PathBuf;

use clap::Args;
use mtforge::eval::ifmt::{score_outputs, IfmtEndpoints, IfmtOptions, IfmtTask, SystemOutput};
use serde_json::json;

use crate::commands::{read_rows, CommonArgs, Runtime};
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct EvalIfmtArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Tasks from gen-ifmt, one JSON object per line
    #[arg(long)]
    pub tasks: PathBuf,

    /// System outputs, one {"id", "translation"} per line
    #[arg(long)]
    pub outputs: PathBuf,

    /// Where to write the dual-score report (JSON)
    #[arg(long)]
    pub output: PathBuf,
}

pub fn run(args: &EvalIfmtArgs) -> anyhow::Result<()> {
    let runtime = Runtime::load(&args.common)?;
    let tasks: Vec<IfmtTask> = read_rows(&args.tasks, "tasks")?;
    let outputs: Vec<SystemOutput> = read_rows(&args.outputs, "system outputs")?;

    let gateway = runtime.gateway(&["judge", "quality"])?;
    let endpoints = IfmtEndpoints { judge: "judge".into(), quality: "quality".into() };
    let options = IfmtOptions { workers: runtime.workers, ..IfmtOptions::default() };

    let report = score_outputs(&gateway, &endpoints, &tasks, &outputs, &options)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&args.output, text)?;

    let mut manifest = RunManifest::new("eval-ifmt", runtime.seed, runtime.offline);
    manifest.record_input("tasks", &args.tasks)?;
    manifest.record_input("outputs", &args.outputs)?;
    manifest.summary = json!({
        "instances": report.instances.len(),
        "instruction_mean": report.instruction_mean,
        "quality_mean": report.quality_mean,
    });
    manifest.write_beside(&args.output)?;

    println!(
        "eval-ifmt: instruction {:.3}, quality {:.3} over {} instances",
        report.instruction_mean,
        report.quality_mean,
        report.instances.len()
    );
    Ok(())
}
