//! Preference pair construction: minimum Bayes risk selection over a
//! candidate pool, double-checked by a second metric and a pairwise
//! judge before a chosen/rejected pair is emitted. Human post-edits feed
//! in directly, with unedited outputs dropped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, GenParams, ScoreRequest};
use crate::hashing::stable_u64;
use crate::model::{
    compare_scores, Conversation, Direction, JudgeVerdict, ScoreComparison, VerdictChoice,
};
use crate::pipeline::par_map_ordered;

#[derive(Debug, Error)]
pub enum PrefError {
    #[error("utility matrix must be square: {rows} rows but row {row} has {cols} columns")]
    BadMatrix { rows: usize, row: usize, cols: usize },
    #[error("reply has no `Chosen:` verdict line")]
    VerdictMissing,
    #[error("verdict must be [A], [B], or [T], got {0:?}")]
    VerdictInvalid(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Result of scoring one candidate pool: per-candidate expected utility
/// against the rest of the pool, plus the indices picked as best and worst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbrOutcome {
    pub utilities: Vec<f64>,
    pub best: usize,
    pub worst: usize,
}

/// Minimum Bayes risk selection. `matrix[i][j]` is the utility of
/// candidate `i` evaluated against candidate `j` as pseudo-reference;
/// each candidate's score is its mean utility over all others (the
/// diagonal is ignored, a lone candidate scores 0). Ties resolve to the
/// lowest index on both ends.
pub fn mbr_from_matrix(matrix: &[Vec<f64>], direction: Direction) -> Result<MbrOutcome, PrefError> {
    let n = matrix.len();
    for (row, cols) in matrix.iter().enumerate() {
        if cols.len() != n {
            return Err(PrefError::BadMatrix { rows: n, row, cols: cols.len() });
        }
    }
    let utilities: Vec<f64> = (0..n)
        .map(|i| {
            if n < 2 {
                return 0.0;
            }
            let sum: f64 = (0..n).filter(|&j| j != i).map(|j| matrix[i][j]).sum();
            sum / (n - 1) as f64
        })
        .collect();
    let better = |a: f64, b: f64| match direction {
        Direction::HigherBetter => a > b,
        Direction::LowerBetter => a < b,
    };
    let mut best = 0usize;
    let mut worst = 0usize;
    for (i, &u) in utilities.iter().enumerate() {
        if better(u, utilities[best]) {
            best = i;
        }
        if better(utilities[worst], u) {
            worst = i;
        }
    }
    Ok(MbrOutcome { utilities, best, worst })
}

/// Fills the full ordered-pair utility matrix by scoring every candidate
/// against every other candidate as pseudo-reference.
pub fn mbr_utilities(
    gateway: &Gateway,
    endpoint_id: &str,
    source: &str,
    candidates: &[String],
    lp: Option<&str>,
    workers: usize,
) -> Result<Vec<Vec<f64>>, PrefError> {
    let n = candidates.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let scores = par_map_ordered(pairs.clone(), workers, |_, (i, j)| {
        let request = ScoreRequest {
            source: Some(source.to_owned()),
            hypothesis: candidates[i].clone(),
            reference: Some(candidates[j].clone()),
            lp: lp.map(str::to_owned),
        };
        gateway.score(endpoint_id, &request).map(|s| s.value())
    });
    let mut matrix = vec![vec![0.0; n]; n];
    for ((i, j), score) in pairs.into_iter().zip(scores) {
        matrix[i][j] = score?;
    }
    Ok(matrix)
}

const PAIRWISE_TEMPLATE: &str = r#"Please act as an impartial judge and evaluate the quality of the translations provided by two AI assistants in response to the user's request below. Select the assistant that best adheres to the user's instructions while producing the highest-quality translation overall. If the user's instructions specify particular factors—such as the required level of formality, glossaries, or adherence to provided examples—ensure these are included in your evaluation. Begin by comparing the two translations and provide a concise explanation of your assessment. Avoid personal opinions or biases, and do not favour one assistant over the other. Be objective and impartial.

After providing your explanation, deliver your final verdict strictly in this format:

Chosen: <[A] if Assistant A is better, [B] if Assistant B is better, or [T] if both are equally good or bad.>

[User Instruction]

{instruction}

[End of User Instruction]

[Start of Assistant A's Response]

{assistant a response}

[End of Assistant A's Response]

[Start of Assistant B's Response]

{assistant b response}

[End of Assistant B's Response]"#;

pub fn build_pairwise_prompt(instruction: &str, response_a: &str, response_b: &str) -> String {
    PAIRWISE_TEMPLATE
        .replace("{instruction}", instruction)
        .replace("{assistant a response}", response_a)
        .replace("{assistant b response}", response_b)
}

/// Reads the final `Chosen:` line of a judge reply. The last occurrence
/// wins; the verdict token tolerates bracket and angle wrappers and any
/// case, but must resolve to A, B, or T. Everything before the verdict
/// line is kept as the rationale.
pub fn parse_choice(reply: &str) -> Result<JudgeVerdict, PrefError> {
    const LABEL: &str = "Chosen:";
    let at = reply.rfind(LABEL).ok_or(PrefError::VerdictMissing)?;
    let rest = reply[at + LABEL.len()..].trim_start();
    let token = rest.split_whitespace().next().unwrap_or("");
    let cleaned: String = token.chars().filter(|c| c.is_ascii_alphabetic()).collect();
    let choice = match cleaned.to_ascii_uppercase().as_str() {
        "A" => VerdictChoice::A,
        "B" => VerdictChoice::B,
        "T" => VerdictChoice::Tie,
        _ => return Err(PrefError::VerdictInvalid(token.to_owned())),
    };
    Ok(JudgeVerdict { choice, rationale: reply[..at].trim().to_owned() })
}

/// Whether the MBR winner is shown to the judge as Assistant A for this
/// item. A seeded hash flips presentation per item so the judge's side
/// bias cannot line up with the MBR choice.
pub fn chosen_presented_as_a(seed: u64, id: &str) -> bool {
    stable_u64(&["pref-presentation", &seed.to_string(), id]) % 2 == 0
}

/// A candidate pool awaiting preference extraction. `instruction` is the
/// user request the judge sees; `source` is the source text the metrics
/// score against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceCandidates {
    pub id: String,
    pub instruction: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp: Option<String>,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub id: String,
    pub instruction: String,
    pub chosen: String,
    pub rejected: String,
    pub chosen_index: usize,
    pub rejected_index: usize,
    pub utilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrefDropReason {
    /// Fewer than two candidates, or best and worst collapsed onto the
    /// same candidate, so there is no pair to extract.
    NoPreferenceSignal,
    MetricDisagreed,
    JudgeDisagreed,
    JudgeTied,
    JudgeUnparseable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedPreference {
    pub id: String,
    pub reason: PrefDropReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreferenceReport {
    pub pairs: Vec<PreferencePair>,
    pub dropped: Vec<DroppedPreference>,
}

#[derive(Debug, Clone)]
pub struct PrefEndpoints {
    /// Pairwise utility metric driving MBR selection.
    pub mbr_utility: String,
    /// Independent metric confirming chosen > rejected.
    pub second_metric: String,
    /// Pairwise judge confirming the same.
    pub judge: String,
}

#[derive(Debug, Clone)]
pub struct PrefOptions {
    pub workers: usize,
    pub strict: bool,
    /// Seed for per-item presentation randomization.
    pub seed: u64,
    pub judge_params: GenParams,
}

impl Default for PrefOptions {
    fn default() -> Self {
        Self { workers: 4, strict: false, seed: 0, judge_params: GenParams::default() }
    }
}

enum Outcome {
    Pair(Box<PreferencePair>),
    Dropped(DroppedPreference),
}

fn build_one(
    gateway: &Gateway,
    endpoints: &PrefEndpoints,
    item: &PreferenceCandidates,
    options: &PrefOptions,
) -> Result<Outcome, PrefError> {
    let dropped = |reason| {
        Ok(Outcome::Dropped(DroppedPreference { id: item.id.clone(), reason }))
    };
    if item.candidates.len() < 2 {
        return dropped(PrefDropReason::NoPreferenceSignal);
    }
    let matrix = mbr_utilities(
        gateway,
        &endpoints.mbr_utility,
        &item.source,
        &item.candidates,
        item.lp.as_deref(),
        1,
    )?;
    let direction = gateway
        .info(&endpoints.mbr_utility)?
        .direction
        .ok_or_else(|| GatewayError::DirectionMissing { endpoint: endpoints.mbr_utility.clone() })?;
    let outcome = mbr_from_matrix(&matrix, direction)?;
    let (chosen_index, rejected_index) = (outcome.best, outcome.worst);
    if chosen_index == rejected_index
        || item.candidates[chosen_index] == item.candidates[rejected_index]
    {
        return dropped(PrefDropReason::NoPreferenceSignal);
    }
    let chosen = item.candidates[chosen_index].clone();
    let rejected = item.candidates[rejected_index].clone();

    let score_of = |text: &str| {
        gateway.score(
            &endpoints.second_metric,
            &ScoreRequest {
                source: Some(item.source.clone()),
                hypothesis: text.to_owned(),
                reference: None,
                lp: item.lp.clone(),
            },
        )
    };
    let chosen_score = score_of(&chosen)?;
    let rejected_score = score_of(&rejected)?;
    if compare_scores(&chosen_score, &rejected_score)? != ScoreComparison::ABetter {
        return dropped(PrefDropReason::MetricDisagreed);
    }

    let chosen_is_a = chosen_presented_as_a(options.seed, &item.id);
    let (response_a, response_b) =
        if chosen_is_a { (&chosen, &rejected) } else { (&rejected, &chosen) };
    let prompt = Conversation::from_prompt(
        build_pairwise_prompt(&item.instruction, response_a, response_b),
        "preference-judging",
    );
    let texts = gateway.generate(&endpoints.judge, &prompt, &options.judge_params)?;
    let verdict = match parse_choice(&texts[0]) {
        Ok(verdict) => verdict,
        Err(PrefError::VerdictMissing | PrefError::VerdictInvalid(_)) if !options.strict => {
            return dropped(PrefDropReason::JudgeUnparseable)
        }
        Err(err) => return Err(err),
    };
    let judge_backs_chosen = match verdict.choice {
        VerdictChoice::A => chosen_is_a,
        VerdictChoice::B => !chosen_is_a,
        VerdictChoice::Tie => return dropped(PrefDropReason::JudgeTied),
    };
    if !judge_backs_chosen {
        return dropped(PrefDropReason::JudgeDisagreed);
    }

    Ok(Outcome::Pair(Box::new(PreferencePair {
        id: item.id.clone(),
        instruction: item.instruction.clone(),
        chosen,
        rejected,
        chosen_index,
        rejected_index,
        utilities: outcome.utilities,
    })))
}

/// Extracts a chosen/rejected pair per candidate pool, keeping only
/// pairs where the second metric and the judge both back the MBR choice.
pub fn build_preferences(
    gateway: &Gateway,
    endpoints: &PrefEndpoints,
    items: &[PreferenceCandidates],
    options: &PrefOptions,
) -> Result<PreferenceReport, PrefError> {
    gateway.info(&endpoints.mbr_utility)?;
    gateway.info(&endpoints.second_metric)?;
    let indexed: Vec<&PreferenceCandidates> = items.iter().collect();
    let outcomes = par_map_ordered(indexed, options.workers, |_, item| {
        build_one(gateway, endpoints, item, options)
    });
    let mut report = PreferenceReport::default();
    for outcome in outcomes {
        match outcome? {
            Outcome::Pair(pair) => report.pairs.push(*pair),
            Outcome::Dropped(drop) => report.dropped.push(drop),
        }
    }
    Ok(report)
}

/// A professionally post-edited system output. The edit is preferred
/// over the original by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostEdit {
    pub id: String,
    pub instruction: String,
    pub original: String,
    pub edited: String,
}

/// Turns post-edits into preference pairs, skipping outputs the editor
/// left untouched. Returns the pairs and the count of skipped items.
pub fn ingest_post_edits(edits: &[PostEdit]) -> (Vec<PreferencePair>, usize) {
    let mut pairs = Vec::new();
    let mut unedited = 0usize;
    for edit in edits {
        if edit.original == edit.edited {
            unedited += 1;
            continue;
        }
        pairs.push(PreferencePair {
            id: edit.id.clone(),
            instruction: edit.instruction.clone(),
            chosen: edit.edited.clone(),
            rejected: edit.original.clone(),
            chosen_index: 0,
            rejected_index: 1,
            utilities: Vec::new(),
        });
    }
    (pairs, unedited)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::limiter::ManualClock;
    use crate::gateway::mock::{MockReply, MockTransport};
    use crate::gateway::transport::Route;
    use crate::gateway::EndpointConfig;
    use std::sync::Arc;

    /// Straight-line transcription of the selection rule, written
    /// independently of `mbr_from_matrix` as a cross-check.
    fn reference_mbr(matrix: &[Vec<f64>]) -> (Vec<f64>, usize, usize) {
        let n = matrix.len();
        let mut utilities = vec![0.0f64; n];
        if n > 1 {
            for i in 0..n {
                let mut total = 0.0;
                for j in 0..n {
                    if i != j {
                        total += matrix[i][j];
                    }
                }
                utilities[i] = total / (n as f64 - 1.0);
            }
        }
        let mut best = 0;
        let mut worst = 0;
        for i in 1..n {
            if utilities[i] > utilities[best] {
                best = i;
            }
            if utilities[i] < utilities[worst] {
                worst = i;
            }
        }
        (utilities, best, worst)
    }

    #[test]
    fn mbr_means_ignore_the_diagonal() {
        let matrix = vec![
            vec![9.0, 0.8, 0.6],
            vec![0.7, 9.0, 0.9],
            vec![0.2, 0.3, 9.0],
        ];
        let outcome = mbr_from_matrix(&matrix, Direction::HigherBetter).unwrap();
        assert_eq!(outcome.utilities, vec![0.7, 0.8, 0.25]);
        assert_eq!(outcome.best, 1);
        assert_eq!(outcome.worst, 2);
    }

    #[test]
    fn mbr_ties_resolve_to_the_lowest_index() {
        let matrix = vec![vec![0.0, 0.5], vec![0.5, 0.0]];
        let outcome = mbr_from_matrix(&matrix, Direction::HigherBetter).unwrap();
        assert_eq!(outcome.best, 0);
        assert_eq!(outcome.worst, 0);
    }

    #[test]
    fn mbr_single_candidate_scores_zero() {
        let outcome = mbr_from_matrix(&[vec![3.0]], Direction::HigherBetter).unwrap();
        assert_eq!(outcome.utilities, vec![0.0]);
        assert_eq!(outcome.best, 0);
        assert_eq!(outcome.worst, 0);
    }

    #[test]
    fn mbr_lower_better_flips_the_ends() {
        let matrix = vec![
            vec![0.0, 2.0, 4.0],
            vec![1.0, 0.0, 1.0],
            vec![8.0, 6.0, 0.0],
        ];
        let outcome = mbr_from_matrix(&matrix, Direction::LowerBetter).unwrap();
        assert_eq!(outcome.best, 1);
        assert_eq!(outcome.worst, 2);
    }

    #[test]
    fn mbr_rejects_ragged_matrices() {
        let matrix = vec![vec![0.0, 1.0], vec![0.5]];
        assert!(matches!(
            mbr_from_matrix(&matrix, Direction::HigherBetter),
            Err(PrefError::BadMatrix { rows: 2, row: 1, cols: 1 })
        ));
    }

    #[test]
    fn mbr_matches_an_independent_transcription() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for n in 1..=8usize {
            for _ in 0..50 {
                let matrix: Vec<Vec<f64>> =
                    (0..n).map(|_| (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
                let outcome = mbr_from_matrix(&matrix, Direction::HigherBetter).unwrap();
                let (utilities, best, worst) = reference_mbr(&matrix);
                assert_eq!(outcome.utilities, utilities);
                assert_eq!(outcome.best, best);
                assert_eq!(outcome.worst, worst);
            }
        }
    }

    #[test]
    fn pairwise_prompt_substitutes_all_three_blocks() {
        let prompt = build_pairwise_prompt("Translate to German: hello", "Hallo", "Guten Tag");
        assert!(prompt.starts_with("Please act as an impartial judge"));
        assert!(prompt.contains("[User Instruction]\n\nTranslate to German: hello\n\n[End of User Instruction]"));
        assert!(prompt.contains("[Start of Assistant A's Response]\n\nHallo\n\n[End of Assistant A's Response]"));
        assert!(prompt.contains("[Start of Assistant B's Response]\n\nGuten Tag\n\n[End of Assistant B's Response]"));
    }

    #[test]
    fn choice_parser_reads_bracketed_and_bare_verdicts() {
        assert_eq!(parse_choice("Both are close.\nChosen: [A]").unwrap().choice, VerdictChoice::A);
        assert_eq!(parse_choice("Chosen: B").unwrap().choice, VerdictChoice::B);
        assert_eq!(parse_choice("Chosen: [t]").unwrap().choice, VerdictChoice::Tie);
        let verdict = parse_choice("A is fluent, B stilted.\n\nChosen: [A]").unwrap();
        assert_eq!(verdict.rationale, "A is fluent, B stilted.");
    }

    #[test]
    fn choice_parser_takes_the_last_verdict_line() {
        let reply = "Chosen: <[A] if Assistant A is better, [B] if Assistant B is better, or [T] if both are equally good or bad.>\nComparing...\nChosen: [B]";
        assert_eq!(parse_choice(reply).unwrap().choice, VerdictChoice::B);
    }

    #[test]
    fn choice_parser_rejects_missing_or_garbled_verdicts() {
        assert!(matches!(parse_choice("no verdict"), Err(PrefError::VerdictMissing)));
        assert!(matches!(
            parse_choice("Chosen: [C]"),
            Err(PrefError::VerdictInvalid(_))
        ));
        assert!(matches!(parse_choice("Chosen: "), Err(PrefError::VerdictInvalid(_))));
    }

    #[test]
    fn presentation_side_is_deterministic_and_mixed() {
        let first = chosen_presented_as_a(5, "item-0");
        assert_eq!(first, chosen_presented_as_a(5, "item-0"));
        let sides: Vec<bool> = (0..64).map(|i| chosen_presented_as_a(5, &format!("item-{i}"))).collect();
        assert!(sides.iter().any(|&s| s));
        assert!(sides.iter().any(|&s| !s));
    }

    #[test]
    fn post_edits_become_pairs_and_unedited_outputs_drop() {
        let edits = vec![
            PostEdit {
                id: "pe-0".into(),
                instruction: "translate".into(),
                original: "rough draft".into(),
                edited: "polished version".into(),
            },
            PostEdit {
                id: "pe-1".into(),
                instruction: "translate".into(),
                original: "already perfect".into(),
                edited: "already perfect".into(),
            },
        ];
        let (pairs, unedited) = ingest_post_edits(&edits);
        assert_eq!(pairs.len(), 1);
        assert_eq!(unedited, 1);
        assert_eq!(pairs[0].chosen, "polished version");
        assert_eq!(pairs[0].rejected, "rough draft");
    }

    fn block<'a>(prompt: &'a str, start: &str, end: &str) -> &'a str {
        let s = prompt.find(start).unwrap() + start.len();
        let e = prompt.find(end).unwrap();
        prompt[s..e].trim()
    }

    /// Scores are candidate length; the judge prefers the longer block.
    /// MBR, metric, and judge therefore all agree on the longest string.
    fn agreeing_mock() -> Arc<MockTransport> {
        let mock = Arc::new(MockTransport::new());
        for id in ["mbr", "metricx"] {
            mock.on(id, Route::Info, move |_| {
                MockReply::ok(serde_json::json!({"metric_id": id, "direction": "higher_better"}))
            });
        }
        let by_length = |req: &crate::gateway::transport::WireRequest| {
            let hyp = req.body.as_ref().unwrap()["hypothesis"].as_str().unwrap();
            MockReply::ok(serde_json::json!({"value": hyp.len() as f64}))
        };
        mock.on("mbr", Route::Score, by_length);
        mock.on("metricx", Route::Score, by_length);
        mock.on("judge", Route::Generate, |req| {
            let prompt = req.body.as_ref().unwrap()["messages"][0]["text"].as_str().unwrap();
            let a = block(prompt, "[Start of Assistant A's Response]", "[End of Assistant A's Response]");
            let b = block(prompt, "[Start of Assistant B's Response]", "[End of Assistant B's Response]");
            let verdict = if a.len() > b.len() {
                "Chosen: [A]"
            } else if b.len() > a.len() {
                "Chosen: [B]"
            } else {
                "Chosen: [T]"
            };
            MockReply::ok(serde_json::json!({"texts": [format!("Length wins.\n{verdict}")]}))
        });
        mock
    }

    fn pref_gateway(mock: &Arc<MockTransport>) -> Gateway {
        Gateway::builder()
            .endpoint("mbr", EndpointConfig::new("http://mbr.test"))
            .endpoint("metricx", EndpointConfig::new("http://metricx.test"))
            .endpoint("judge", EndpointConfig::new("http://judge.test"))
            .transport(mock.clone())
            .clock(Arc::new(ManualClock::new()))
            .build()
            .unwrap()
    }

    fn endpoints() -> PrefEndpoints {
        PrefEndpoints {
            mbr_utility: "mbr".into(),
            second_metric: "metricx".into(),
            judge: "judge".into(),
        }
    }

    fn pool(id: &str, candidates: &[&str]) -> PreferenceCandidates {
        PreferenceCandidates {
            id: id.into(),
            instruction: "Translate: the meeting is tomorrow".into(),
            source: "the meeting is tomorrow".into(),
            lp: Some("en-de".into()),
            candidates: candidates.iter().map(|c| (*c).to_owned()).collect(),
        }
    }

    #[test]
    fn agreeing_checks_emit_the_mbr_pair() {
        let mock = agreeing_mock();
        let gateway = pref_gateway(&mock);
        let items = vec![pool("p0", &["mid length", "the longest candidate here", "tiny"])];
        let report =
            build_preferences(&gateway, &endpoints(), &items, &PrefOptions::default()).unwrap();
        assert_eq!(report.dropped, vec![]);
        assert_eq!(report.pairs.len(), 1);
        let pair = &report.pairs[0];
        assert_eq!(pair.chosen, "the longest candidate here");
        assert_eq!(pair.rejected, "tiny");
        assert_eq!(pair.chosen_index, 1);
        assert_eq!(pair.rejected_index, 2);
        assert_eq!(pair.utilities.len(), 3);
    }

    #[test]
    fn metric_disagreement_drops_the_pair() {
        let mock = agreeing_mock();
        mock.on("metricx", Route::Score, |req| {
            let hyp = req.body.as_ref().unwrap()["hypothesis"].as_str().unwrap();
            MockReply::ok(serde_json::json!({"value": -(hyp.len() as f64)}))
        });
        let gateway = pref_gateway(&mock);
        let items = vec![pool("p0", &["mid length", "the longest candidate here", "tiny"])];
        let report =
            build_preferences(&gateway, &endpoints(), &items, &PrefOptions::default()).unwrap();
        assert_eq!(report.pairs, vec![]);
        assert_eq!(report.dropped[0].reason, PrefDropReason::MetricDisagreed);
    }

    #[test]
    fn judge_disagreement_and_ties_drop_the_pair() {
        let mock = agreeing_mock();
        mock.on("judge", Route::Generate, |req| {
            let prompt = req.body.as_ref().unwrap()["messages"][0]["text"].as_str().unwrap();
            let a = block(prompt, "[Start of Assistant A's Response]", "[End of Assistant A's Response]");
            let b = block(prompt, "[Start of Assistant B's Response]", "[End of Assistant B's Response]");
            let verdict = if a.len() < b.len() { "Chosen: [A]" } else { "Chosen: [B]" };
            MockReply::ok(serde_json::json!({"texts": [verdict]}))
        });
        let gateway = pref_gateway(&mock);
        let items = vec![pool("p0", &["mid length", "the longest candidate here", "tiny"])];
        let report =
            build_preferences(&gateway, &endpoints(), &items, &PrefOptions::default()).unwrap();
        assert_eq!(report.dropped[0].reason, PrefDropReason::JudgeDisagreed);

        let mock = agreeing_mock();
        mock.on("judge", Route::Generate, |_| {
            MockReply::ok(serde_json::json!({"texts": ["Chosen: [T]"]}))
        });
        let gateway = pref_gateway(&mock);
        let items = vec![pool("p1", &["mid length", "the longest candidate here", "tiny"])];
        let report =
            build_preferences(&gateway, &endpoints(), &items, &PrefOptions::default()).unwrap();
        assert_eq!(report.dropped[0].reason, PrefDropReason::JudgeTied);
    }

    #[test]
    fn degenerate_pools_drop_without_endpoint_traffic_beyond_handshake() {
        let mock = agreeing_mock();
        let gateway = pref_gateway(&mock);
        let items = vec![
            pool("lonely", &["only one"]),
            pool("identical", &["same text", "same text"]),
        ];
        let report =
            build_preferences(&gateway, &endpoints(), &items, &PrefOptions::default()).unwrap();
        assert_eq!(report.pairs, vec![]);
        assert_eq!(report.dropped.len(), 2);
        for drop in &report.dropped {
            assert_eq!(drop.reason, PrefDropReason::NoPreferenceSignal);
        }
        assert_eq!(mock.call_count("judge", Route::Generate), 0);
    }

    #[test]
    fn unparseable_judge_drops_leniently_and_aborts_strictly() {
        let mock = agreeing_mock();
        mock.on("judge", Route::Generate, |_| {
            MockReply::ok(serde_json::json!({"texts": ["I decline to pick."]}))
        });
        let gateway = pref_gateway(&mock);
        let items = vec![pool("p0", &["mid length", "the longest candidate here", "tiny"])];
        let report =
            build_preferences(&gateway, &endpoints(), &items, &PrefOptions::default()).unwrap();
        assert_eq!(report.dropped[0].reason, PrefDropReason::JudgeUnparseable);

        let strict = PrefOptions { strict: true, ..PrefOptions::default() };
        assert!(matches!(
            build_preferences(&gateway, &endpoints(), &items, &strict),
            Err(PrefError::VerdictMissing)
        ));
    }

    #[test]
    fn reports_are_deterministic_for_a_fixed_seed() {
        let items = vec![
            pool("p0", &["alpha candidate", "beta", "the gamma candidate text"]),
            pool("p1", &["one", "two two", "three three three"]),
        ];
        let run = || {
            let gateway = pref_gateway(&agreeing_mock());
            build_preferences(&gateway, &endpoints(), &items, &PrefOptions::default()).unwrap()
        };
        assert_eq!(run(), run());
    }
}
