//! Renders parallel pairs into continued-pretraining documents, with an
//! optional quality gate in front.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use mtforge::corpus::{quality_gate, GateOptions, TemplateRegistry};
use mtforge::hashing::stable_u64;
use mtforge::model::ParallelPair;
use serde::Serialize;
use serde_json::json;

use crate::commands::{read_rows, CommonArgs, Runtime};
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct CorpusPrepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Parallel pairs, one JSON object per line
    #[arg(long)]
    pub input: PathBuf,

    /// Rendered documents, one JSON object per line
    #[arg(long)]
    pub output: PathBuf,

    /// Score pairs with the quality endpoint and drop those below the
    /// configured threshold before rendering
    #[arg(long)]
    pub gate: bool,

    /// Render every pair with this template instead of rotating through
    /// the registry
    #[arg(long)]
    pub template: Option<String>,
}

#[derive(Debug, Serialize)]
struct CorpusDoc {
    index: usize,
    template: String,
    lp: String,
    text: String,
}

pub fn run(args: &CorpusPrepArgs) -> anyhow::Result<()> {
    let runtime = Runtime::load(&args.common)?;
    let pairs: Vec<ParallelPair> = read_rows(&args.input, "parallel pairs")?;
    let total = pairs.len();

    let mut registry = TemplateRegistry::builtin();
    if let Some(dir) = &runtime.config.corpus.template_dir {
        registry
            .load_dir(dir)
            .with_context(|| format!("loading templates from {}", dir.display()))?;
    }

    let (pairs, gated_out) = if args.gate {
        let gateway = runtime.gateway(&["quality"])?;
        let options = GateOptions {
            workers: runtime.workers,
            strict: runtime.strict,
            ..GateOptions::new(runtime.config.corpus.gate_threshold)
        };
        let outcome = quality_gate(pairs, &gateway, "quality", &options)?;
        (outcome.kept, outcome.skipped.len())
    } else {
        (pairs, 0)
    };

    let mut ids: Vec<&str> = registry.ids().collect();
    ids.sort_unstable();
    let docs: Vec<CorpusDoc> = pairs
        .iter()
        .enumerate()
        .map(|(index, pair)| {
            let template_id = match &args.template {
                Some(id) => id.as_str(),
                None => {
                    let pick = stable_u64(&[
                        "corpus-template",
                        &runtime.seed.to_string(),
                        &index.to_string(),
                    ]) as usize;
                    ids[pick % ids.len()]
                }
            };
            let text = registry.render(template_id, pair)?;
            Ok(CorpusDoc {
                index,
                template: template_id.to_owned(),
                lp: format!("{}-{}", pair.lp0.code(), pair.lp1.code()),
                text,
            })
        })
        .collect::<Result<_, mtforge::corpus::CorpusError>>()?;

    let written = mtforge::jsonl::write_all(&args.output, &docs)?;

    let mut manifest = RunManifest::new("corpus-prep", runtime.seed, runtime.offline);
    manifest.record_input("pairs", &args.input)?;
    manifest.summary = json!({
        "pairs": total,
        "gated_out": gated_out,
        "rendered": written,
    });
    manifest.write_beside(&args.output)?;

    println!("corpus-prep: {written} documents from {total} pairs ({gated_out} gated out)");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mtforge::model::LanguageTag;

    fn write_pairs(path: &std::path::Path, count: usize) {
        let lp0 = LanguageTag::new("en", "English").unwrap();
        let lp1 = LanguageTag::new("de", "German").unwrap();
        let pairs: Vec<ParallelPair> = (0..count)
            .map(|i| ParallelPair {
                source: format!("sentence {i}"),
                target: format!("Satz {i}"),
                lp0: lp0.clone(),
                lp1: lp1.clone(),
                provenance: None,
            })
            .collect();
        mtforge::jsonl::write_all(path, &pairs).unwrap();
    }

    fn args(dir: &std::path::Path, gate: bool) -> CorpusPrepArgs {
        CorpusPrepArgs {
            common: CommonArgs {
                config: None,
                offline: true,
                seed: Some(3),
                workers: Some(2),
                strict: false,
            },
            input: dir.join("pairs.jsonl"),
            output: dir.join("docs.jsonl"),
            gate,
            template: None,
        }
    }

    #[test]
    fn renders_deterministically_and_writes_a_manifest() {
        let dir = tempfile::tempdir().unwrap();
        write_pairs(&dir.path().join("pairs.jsonl"), 6);
        run(&args(dir.path(), false)).unwrap();
        let first = std::fs::read(dir.path().join("docs.jsonl")).unwrap();
        assert_eq!(first.iter().filter(|b| **b == b'\n').count(), 6);
        run(&args(dir.path(), false)).unwrap();
        assert_eq!(std::fs::read(dir.path().join("docs.jsonl")).unwrap(), first);
        assert!(dir.path().join("docs.jsonl.manifest.json").exists());
    }

    #[test]
    fn offline_gate_drops_low_scoring_pairs() {
        let dir = tempfile::tempdir().unwrap();
        write_pairs(&dir.path().join("pairs.jsonl"), 30);
        run(&args(dir.path(), true)).unwrap();
        let rendered = std::fs::read_to_string(dir.path().join("docs.jsonl")).unwrap();
        let kept = rendered.lines().count();
        assert!(kept > 0 && kept < 30, "kept {kept}");
    }
}
