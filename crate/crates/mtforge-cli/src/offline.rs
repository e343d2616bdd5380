//! Deterministic stand-ins for every model service, so complete pipelines
//! can run with no network and reproduce byte for byte.
//!
//! Every decision is a pure function of the request text, built on the
//! crate's stable hash. Tests replay those functions to predict exactly
//! what an offline run must produce.

use mtforge::gateway::transport::{Route, Transport, TransportError, WireRequest, WireResponse};
use mtforge::guidelines::prompts::{END_MARKER, GUIDELINES_MARKER, SOURCE_MARKER};
use mtforge::guidelines::{builtin_catalog, Catalog, GuidelineSpec};
use mtforge::model::Category;
use serde_json::{json, Value};

use mtforge::hashing::{stable_u64, unit_interval};

/// Fraction of generated sources that ignore their brief and already
/// follow one of their own guidelines.
pub const COMPLIANT_SOURCE_RATE: f64 = 0.15;
/// Fraction of clean sources the verification judge flags anyway.
pub const JUDGE_FLAG_RATE: f64 = 0.12;
/// Fraction of verification replies that come back unparseable.
pub const JUDGE_GARBLE_RATE: f64 = 0.05;
/// Fraction of translations that drop their first required pattern.
pub const TRANSLATION_MISS_RATE: f64 = 0.10;

pub fn source_is_compliant(prompt: &str) -> bool {
    unit_interval(&["offline-compliant", prompt]) < COMPLIANT_SOURCE_RATE
}

pub fn judge_flags_source(prompt: &str) -> bool {
    unit_interval(&["offline-flag", prompt]) < JUDGE_FLAG_RATE
}

pub fn judge_reply_garbled(prompt: &str) -> bool {
    unit_interval(&["offline-garble", prompt]) < JUDGE_GARBLE_RATE
}

pub fn translation_drops_pattern(prompt: &str) -> bool {
    unit_interval(&["offline-miss", prompt]) < TRANSLATION_MISS_RATE
}

/// Quality estimate for a text, in [0.6, 1.0) so a 0.8 gate passes about
/// half of everything. Monotone in [`text_strength`], which keeps metric
/// rankings and judge verdicts agreeing with each other.
pub fn score_value(text: &str) -> f64 {
    0.6 + 0.4 * text_strength(text)
}

/// Position-independent strength of a candidate text, used wherever two
/// texts are compared.
pub fn text_strength(text: &str) -> f64 {
    unit_interval(&["offline-strength", text])
}

/// A short pronounceable token derived from the prompt, keeping replies
/// distinct without introducing digits or symbols that could trip a
/// guideline pattern.
pub fn hash_word(parts: &[&str]) -> String {
    let mut h = stable_u64(parts);
    let mut word = String::new();
    for _ in 0..6 {
        word.push((b'a' + (h % 26) as u8) as char);
        h /= 26;
    }
    word
}

fn neutral_source(prompt: &str) -> String {
    format!(
        "The {} committee met quietly and agreed to keep its plans modest. \
         Nothing unusual was recorded and the discussion ended early.",
        hash_word(&["offline-word", prompt])
    )
}

/// Guideline specs whose prompt lines appear in the given text, in order
/// of appearance. This is how the stand-in recovers which guidelines a
/// pipeline prompt is talking about. Only the text after the last end
/// marker is searched, because the generation template's worked examples
/// quote guideline lines of their own.
pub fn specs_in_prompt<'a>(prompt: &str, catalog: &'a Catalog) -> Vec<&'a GuidelineSpec> {
    let tail_start = prompt
        .rfind(END_MARKER)
        .map(|at| at + END_MARKER.len())
        .unwrap_or(0);
    let tail = &prompt[tail_start..];
    let mut found: Vec<(usize, &GuidelineSpec)> = catalog
        .specs()
        .filter_map(|spec| tail.find(&spec.prompt_line()).map(|at| (at, spec)))
        .collect();
    found.sort_by_key(|(at, _)| *at);
    found.into_iter().map(|(_, spec)| spec).collect()
}

/// Reply to a source-generation prompt: a neutral source that follows no
/// guideline, except for a deterministic slice of prompts whose source
/// sneaks in a guideline-satisfying phrase.
pub fn generation_reply(prompt: &str, catalog: &Catalog) -> String {
    let specs = specs_in_prompt(prompt, catalog);
    let mut source = neutral_source(prompt);
    if source_is_compliant(prompt) {
        if let Some(first) = specs.first() {
            source.push_str(&format!(" It even mentions {}.", first.example_output()));
        }
    }
    let guidelines = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| format!("{}) {}", i + 1, spec.prompt_line()))
        .collect::<Vec<_>>()
        .join("\n");
    format!("{SOURCE_MARKER}\n{source}\n{GUIDELINES_MARKER}\n{guidelines}\n{END_MARKER}")
}

/// Reply to a source-verification prompt: a small slice is unparseable,
/// a further slice flags the source, the rest pass it.
pub fn verification_reply(prompt: &str) -> String {
    if judge_reply_garbled(prompt) {
        return "I cannot assess this document properly.".to_owned();
    }
    let check = if judge_flags_source(prompt) { 1 } else { 0 };
    format!(
        "###EVALUATION###\nChecked each guideline against the text in turn.\n\
         Guidelines Check: {check}\n###END###"
    )
}

/// Reply to a guideline-carrying translation prompt: a carrier sentence
/// plus one sentence per guideline embedding its example output, with the
/// first guideline deterministically dropped now and then.
pub fn translation_reply(prompt: &str, catalog: &Catalog) -> String {
    let specs = specs_in_prompt(prompt, catalog);
    let mut parts = vec![format!("Offline rendering {}.", hash_word(&["offline-tr", prompt]))];
    for (i, spec) in specs.iter().enumerate() {
        if i == 0 && translation_drops_pattern(prompt) {
            continue;
        }
        parts.push(format!("Here it keeps {}.", spec.example_output()));
    }
    parts.join(" ")
}

fn block<'a>(text: &'a str, start: &str, end: &str) -> &'a str {
    let Some(at) = text.find(start) else { return "" };
    let rest = &text[at + start.len()..];
    match rest.find(end) {
        Some(stop) => rest[..stop].trim(),
        None => rest.trim(),
    }
}

fn pairwise_reply(prompt: &str) -> String {
    let a = block(prompt, "[Start of Assistant A's Response]", "[End of Assistant A's Response]");
    let b = block(prompt, "[Start of Assistant B's Response]", "[End of Assistant B's Response]");
    let (sa, sb) = (text_strength(a), text_strength(b));
    let verdict = if sa > sb {
        "[A]"
    } else if sb > sa {
        "[B]"
    } else {
        "[T]"
    };
    format!("Both responses were compared against the request.\nChosen: {verdict}")
}

fn triage_reply(prompt: &str) -> String {
    let category = Category::ALL[(stable_u64(&["offline-category", prompt]) % 10) as usize];
    let reasoning = 1 + stable_u64(&["offline-reasoning", prompt]) % 5;
    let readability = 1 + stable_u64(&["offline-readability", prompt]) % 5;
    format!(
        "Category: {}\nReasoning: {reasoning}\nReadability: {readability}",
        category.label()
    )
}

fn final_score_reply(prompt: &str) -> String {
    let score = 1 + stable_u64(&["offline-final", prompt]) % 5;
    format!("The translation holds up under all four criteria.\nFinal Score: {score}")
}

fn meta_task_reply(prompt: &str) -> String {
    let word = hash_word(&["offline-task", prompt]);
    format!(
        "<START OF PROMPT>\nTranslate the source text below into the requested language, \
         following every rule on the {word} list.\nRules: keep names unchanged; keep the \
         register formal.\nSource text: The {word} office sent a short update about the \
         schedule.\n<END OF PROMPT>\n<START OF REFERENCE>\nReference rendering {word} of \
         the office update, with names unchanged and a formal register.\n<END OF REFERENCE>"
    )
}

fn ifmt_judge_reply(prompt: &str) -> String {
    let result = 1 + stable_u64(&["offline-adherence", prompt]) % 6;
    json!({
        "feedback": "Checked each rule in the prompt against the translation.",
        "result": result.to_string(),
    })
    .to_string()
}

fn fallback_reply(prompt: &str, index: usize) -> String {
    format!(
        "Offline draft {} {}.",
        index + 1,
        hash_word(&["offline-draft", prompt, &index.to_string()])
    )
}

/// Produces the reply a generation prompt earns, by recognizing which
/// pipeline stage wrote it. `index` distinguishes multi-sample draws.
pub fn reply_for_prompt(prompt: &str, index: usize, catalog: &Catalog) -> String {
    if prompt.contains("Must naturally incorporate elements that match ALL guidelines") {
        return generation_reply(prompt, catalog);
    }
    if prompt.contains("guideline-based text rewriting tasks") {
        return verification_reply(prompt);
    }
    if prompt.contains("applying every guideline below to the translation") {
        return translation_reply(prompt, catalog);
    }
    if prompt.contains("Please act as an impartial judge") {
        return pairwise_reply(prompt);
    }
    if prompt.contains("I have an conversation below") {
        return triage_reply(prompt);
    }
    if prompt.contains("You are a professional translator and evaluator") {
        return final_score_reply(prompt);
    }
    if prompt.contains("As an expert prompt engineer") {
        return meta_task_reply(prompt);
    }
    if prompt.contains("You are an expert judge evaluating translation quality") {
        return ifmt_judge_reply(prompt);
    }
    fallback_reply(prompt, index)
}

/// Serves every route of every endpoint with deterministic content.
pub struct OfflineTransport {
    catalog: Catalog,
}

impl OfflineTransport {
    pub fn new() -> Self {
        Self { catalog: builtin_catalog() }
    }
}

impl Default for OfflineTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for OfflineTransport {
    fn execute(&self, request: &WireRequest) -> Result<WireResponse, TransportError> {
        let body = request.body.clone().unwrap_or(Value::Null);
        let reply = match request.route {
            Route::Info => json!({
                "metric_id": format!("offline-{}", request.endpoint_id),
                "direction": "higher_better",
                "version": "offline-1",
            }),
            Route::Score => {
                let hypothesis = body["hypothesis"].as_str().unwrap_or_default();
                json!({ "value": score_value(hypothesis) })
            }
            Route::Reward => {
                let candidate = body["candidate"].as_str().unwrap_or_default();
                json!({ "value": score_value(candidate) })
            }
            Route::Generate => {
                let prompt = body["messages"]
                    .as_array()
                    .map(|messages| {
                        messages
                            .iter()
                            .filter_map(|m| m["text"].as_str())
                            .collect::<Vec<_>>()
                            .join("\n")
                    })
                    .unwrap_or_default();
                let samples = body["num_samples"].as_u64().unwrap_or(1).max(1) as usize;
                let texts: Vec<String> = (0..samples)
                    .map(|i| reply_for_prompt(&prompt, i, &self.catalog))
                    .collect();
                json!({ "texts": texts })
            }
        };
        Ok(WireResponse {
            status: 200,
            body: serde_json::to_vec(&reply).expect("offline reply serializes"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mtforge::guidelines::prompts::{
        build_generation_prompt, build_translation_prompt, parse_generation, parse_verification,
    };
    use mtforge::guidelines::{sample_bundle, sample_rng};
    use mtforge::model::LanguageTag;

    fn catalog() -> Catalog {
        builtin_catalog()
    }

    #[test]
    fn neutral_sources_follow_no_builtin_guideline() {
        let catalog = catalog();
        for salt in 0..50 {
            let source = neutral_source(&format!("prompt variant {salt}"));
            for spec in catalog.specs() {
                assert!(
                    !spec.matches(&source),
                    "{} unexpectedly matches {:?}",
                    spec.id(),
                    source
                );
            }
        }
    }

    #[test]
    fn generation_replies_parse_and_recover_the_bundle() {
        let catalog = catalog();
        let mut rng = sample_rng(11, 0);
        let topics = vec![mtforge::guidelines::TopicPair::new("Technology", "Networking")];
        let bundle = sample_bundle(&catalog, &topics, &mut rng).unwrap();
        let prompt = build_generation_prompt(&bundle);

        let specs = specs_in_prompt(&prompt, &catalog);
        let want: Vec<&str> = bundle.guidelines.iter().map(|g| g.id()).collect();
        let got: Vec<&str> = specs.iter().map(|s| s.id()).collect();
        assert_eq!(got, want);

        let reply = generation_reply(&prompt, &catalog);
        let parsed = parse_generation(&reply).unwrap();
        assert!(!parsed.source_text.is_empty());
    }

    #[test]
    fn verification_replies_cover_pass_flag_and_garble() {
        let mut saw = [false; 3];
        for salt in 0..400 {
            let prompt = format!("guideline-based text rewriting tasks {salt}");
            let reply = verification_reply(&prompt);
            match parse_verification(&reply) {
                Err(_) => saw[2] = true,
                Ok(true) => saw[1] = true,
                Ok(false) => saw[0] = true,
            }
        }
        assert_eq!(saw, [true; 3]);
    }

    #[test]
    fn translation_replies_usually_satisfy_every_pattern() {
        let catalog = catalog();
        let lp0 = LanguageTag::new("en", "English").unwrap();
        let lp1 = LanguageTag::new("de", "German").unwrap();
        let mut full = 0usize;
        let mut short = 0usize;
        for index in 0..60 {
            let mut rng = sample_rng(5, index);
            let topics = vec![mtforge::guidelines::TopicPair::new("Science", "Chemistry")];
            let bundle = sample_bundle(&catalog, &topics, &mut rng).unwrap();
            let prompt = build_translation_prompt(&bundle, "A plain source.", &lp0, &lp1);
            let reply = translation_reply(&prompt, &catalog);
            if bundle.guidelines.iter().all(|g| g.matches(&reply)) {
                full += 1;
            } else {
                short += 1;
            }
        }
        assert!(full > short, "full={full} short={short}");
        assert!(short > 0, "the dropped-pattern path never fired");
    }

    #[test]
    fn pairwise_verdict_is_position_independent() {
        let base = "Please act as an impartial judge.\n[User Instruction]\n\nTranslate.\n\n[End of User Instruction]";
        let ab = format!(
            "{base}\n[Start of Assistant A's Response]\n\nalpha text\n\n[End of Assistant A's Response]\n[Start of Assistant B's Response]\n\nbeta text\n\n[End of Assistant B's Response]"
        );
        let ba = format!(
            "{base}\n[Start of Assistant A's Response]\n\nbeta text\n\n[End of Assistant A's Response]\n[Start of Assistant B's Response]\n\nalpha text\n\n[End of Assistant B's Response]"
        );
        let first = pairwise_reply(&ab);
        let second = pairwise_reply(&ba);
        let flip = |r: &str| {
            if r.ends_with("[A]") {
                "[B]".to_owned()
            } else {
                "[A]".to_owned()
            }
        };
        assert!(second.ends_with(&flip(&first)));
    }

    #[test]
    fn verification_prompt_decisions_match_sampled_rates() {
        let mut flagged = 0usize;
        let total = 2_000;
        for salt in 0..total {
            if judge_flags_source(&format!("prompt {salt}")) {
                flagged += 1;
            }
        }
        let rate = flagged as f64 / total as f64;
        assert!((rate - JUDGE_FLAG_RATE).abs() < 0.03, "rate {rate}");
    }

    #[test]
    fn transport_serves_all_routes() {
        let transport = OfflineTransport::new();
        let request = |route, body| WireRequest {
            endpoint_id: "quality".into(),
            base_url: "offline://quality".into(),
            route,
            body,
            auth_token: None,
            timeout: std::time::Duration::from_secs(1),
        };

        let info = transport.execute(&request(Route::Info, None)).unwrap();
        let info: Value = serde_json::from_slice(&info.body).unwrap();
        assert_eq!(info["direction"], "higher_better");

        let score = transport
            .execute(&request(Route::Score, Some(json!({"hypothesis": "ein Text"}))))
            .unwrap();
        let score: Value = serde_json::from_slice(&score.body).unwrap();
        let value = score["value"].as_f64().unwrap();
        assert!((0.6..1.0).contains(&value));
        assert_eq!(value, score_value("ein Text"));

        let generate = transport
            .execute(&request(
                Route::Generate,
                Some(json!({
                    "messages": [{"role": "user", "text": "Translate this line."}],
                    "temperature": 1.0,
                    "num_samples": 3,
                })),
            ))
            .unwrap();
        let generate: Value = serde_json::from_slice(&generate.body).unwrap();
        let texts = generate["texts"].as_array().unwrap();
        assert_eq!(texts.len(), 3);
        let distinct: std::collections::BTreeSet<&str> =
            texts.iter().filter_map(Value::as_str).collect();
        assert_eq!(distinct.len(), 3);
    }
}
