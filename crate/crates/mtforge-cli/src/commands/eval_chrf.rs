//! Scores hypotheses against references with character n-gram F-scores.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use mtforge::eval::chrf::{corpus_chrf, sentence_chrf};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::commands::{read_rows, CommonArgs, Runtime};
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct EvalChrfArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Line-aligned pairs, one {"hypothesis", "reference"} per line
    #[arg(long, conflicts_with_all = ["hypotheses", "references"])]
    pub input: Option<PathBuf>,

    /// Plain-text hypotheses, one per line (requires --references)
    #[arg(long, requires = "references")]
    pub hypotheses: Option<PathBuf>,

    /// Plain-text references, one per line
    #[arg(long, requires = "hypotheses")]
    pub references: Option<PathBuf>,

    /// Also write per-sentence scores here
    #[arg(long)]
    pub per_sentence: Option<PathBuf>,
}

#[derive(Debug, Deserialize, Serialize)]
struct PairRow {
    hypothesis: String,
    reference: String,
}

#[derive(Debug, Serialize)]
struct SentenceScore {
    index: usize,
    score: f64,
}

pub fn run(args: &EvalChrfArgs) -> anyhow::Result<()> {
    let runtime = Runtime::load(&args.common)?;
    let options = runtime.config.chrf.options();

    let (pairs, input_path) = match (&args.input, &args.hypotheses, &args.references) {
        (Some(path), None, None) => {
            let rows: Vec<PairRow> = read_rows(path, "scored pairs")?;
            (rows, path.clone())
        }
        (None, Some(hyp_path), Some(ref_path)) => {
            let hyps = std::fs::read_to_string(hyp_path)
                .with_context(|| format!("reading {}", hyp_path.display()))?;
            let refs = std::fs::read_to_string(ref_path)
                .with_context(|| format!("reading {}", ref_path.display()))?;
            let hyps: Vec<&str> = hyps.lines().collect();
            let refs: Vec<&str> = refs.lines().collect();
            if hyps.len() != refs.len() {
                return Err(anyhow::Error::new(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{} hypotheses but {} references", hyps.len(), refs.len()),
                )));
            }
            let rows = hyps
                .into_iter()
                .zip(refs)
                .map(|(h, r)| PairRow { hypothesis: h.to_owned(), reference: r.to_owned() })
                .collect();
            (rows, hyp_path.clone())
        }
        _ => bail!("pass either --input or both --hypotheses and --references"),
    };

    let corpus =
        corpus_chrf(pairs.iter().map(|p| (p.hypothesis.as_str(), p.reference.as_str())), &options);

    if let Some(path) = &args.per_sentence {
        let scores: Vec<SentenceScore> = pairs
            .iter()
            .enumerate()
            .map(|(index, p)| SentenceScore {
                index,
                score: sentence_chrf(&p.hypothesis, &p.reference, &options),
            })
            .collect();
        mtforge::jsonl::write_all(path, &scores)?;

        let mut manifest = RunManifest::new("eval-chrf", runtime.seed, runtime.offline);
        manifest.record_input("pairs", &input_path)?;
        manifest.summary = json!({
            "pairs": pairs.len(),
            "corpus_chrf": corpus,
            "max_ngram": options.max_ngram,
            "beta": options.beta,
        });
        manifest.write_beside(path)?;
    }

    println!("chrF: {corpus:.2} over {} pairs", pairs.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common() -> CommonArgs {
        CommonArgs { config: None, offline: true, seed: None, workers: None, strict: false }
    }

    #[test]
    fn jsonl_and_text_inputs_agree() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            PairRow { hypothesis: "Der Hund bellt laut.".into(), reference: "Der Hund bellt.".into() },
            PairRow { hypothesis: "Es regnet heute.".into(), reference: "Heute regnet es.".into() },
        ];
        mtforge::jsonl::write_all(dir.path().join("pairs.jsonl"), &rows).unwrap();
        std::fs::write(
            dir.path().join("hyps.txt"),
            "Der Hund bellt laut.\nEs regnet heute.\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("refs.txt"), "Der Hund bellt.\nHeute regnet es.\n").unwrap();

        let jsonl_args = EvalChrfArgs {
            common: common(),
            input: Some(dir.path().join("pairs.jsonl")),
            hypotheses: None,
            references: None,
            per_sentence: Some(dir.path().join("a.jsonl")),
        };
        run(&jsonl_args).unwrap();
        let text_args = EvalChrfArgs {
            common: common(),
            input: None,
            hypotheses: Some(dir.path().join("hyps.txt")),
            references: Some(dir.path().join("refs.txt")),
            per_sentence: Some(dir.path().join("b.jsonl")),
        };
        run(&text_args).unwrap();

        let a = std::fs::read_to_string(dir.path().join("a.jsonl")).unwrap();
        let b = std::fs::read_to_string(dir.path().join("b.jsonl")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 2);
    }

    #[test]
    fn mismatched_line_counts_fail() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("hyps.txt"), "one\ntwo\n").unwrap();
        std::fs::write(dir.path().join("refs.txt"), "one\n").unwrap();
        let args = EvalChrfArgs {
            common: common(),
            input: None,
            hypotheses: Some(dir.path().join("hyps.txt")),
            references: Some(dir.path().join("refs.txt")),
            per_sentence: None,
        };
        let err = run(&args).unwrap_err();
        assert_eq!(crate::classify_error(&err), crate::EXIT_DATA);
    }
}
