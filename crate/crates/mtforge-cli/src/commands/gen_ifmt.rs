//! Generates instruction-following translation tasks from task specs.

use std::path::PathBuf;

use clap::Args;
use mtforge::eval::ifmt::{generate_tasks, TaskRequest};
use mtforge::gateway::GenParams;
use serde_json::json;

use crate::commands::{read_rows, CommonArgs, Runtime};
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct GenIfmtArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Task specs, one JSON object per line
    #[arg(long)]
    pub specs: PathBuf,

    /// Generated tasks (prompt plus reference), one JSON object per line
    #[arg(long)]
    pub output: PathBuf,
}

pub fn run(args: &GenIfmtArgs) -> anyhow::Result<()> {
    let runtime = Runtime::load(&args.common)?;
    let requests: Vec<TaskRequest> = read_rows(&args.specs, "task specs")?;
    let gateway = runtime.gateway(&["generator"])?;

    let tasks =
        generate_tasks(&gateway, "generator", &requests, &GenParams::default(), runtime.workers)?;
    mtforge::jsonl::write_all(&args.output, &tasks)?;

    let mut manifest = RunManifest::new("gen-ifmt", runtime.seed, runtime.offline);
    manifest.record_input("specs", &args.specs)?;
    manifest.summary = json!({ "tasks": tasks.len() });
    manifest.write_beside(&args.output)?;

    println!("gen-ifmt: {} tasks generated", tasks.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mtforge::eval::ifmt::{IfmtTask, TaskSpec};

    #[test]
    fn offline_generation_yields_prompts_and_references() {
        let dir = tempfile::tempdir().unwrap();
        let requests: Vec<TaskRequest> = (0..4)
            .map(|i| TaskRequest {
                id: format!("task-{i}"),
                spec: TaskSpec {
                    n_rules: 2,
                    source_language: "English".into(),
                    topic: "Logistics".into(),
                    subtopic: format!("Routing {i}"),
                    style: "formal".into(),
                    source_length: "two sentences".into(),
                    target_language: "German".into(),
                },
            })
            .collect();
        mtforge::jsonl::write_all(dir.path().join("specs.jsonl"), &requests).unwrap();

        let args = GenIfmtArgs {
            common: CommonArgs {
                config: None,
                offline: true,
                seed: Some(0),
                workers: Some(2),
                strict: false,
            },
            specs: dir.path().join("specs.jsonl"),
            output: dir.path().join("tasks.jsonl"),
        };
        run(&args).unwrap();

        let tasks: Vec<IfmtTask> =
            mtforge::jsonl::read_all(dir.path().join("tasks.jsonl")).unwrap();
        assert_eq!(tasks.len(), 4);
        for task in &tasks {
            assert!(!task.prompt.is_empty());
            assert!(!task.reference.is_empty());
        }
    }
}
